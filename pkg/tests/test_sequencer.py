import pytest

from circuits import random_circuit
from ionseq.compiler import GateDefinition, compile_program, delta_update, emit_raw_stream
from ionseq.dds import CrosstalkMixer, CrosstalkTap, crosstalk_scale, phase_from_turns
from ionseq.sequencer import Simulator, simulate
from ionseq.wordcodec import encode_word

QUARTER = 1 << 38


def blocks(words):
    return [encode_word(w) for w in words]


def test_zero_amplitude_is_silent():
    g = GateDefinition("g", 30, {0: {"freq0": 12345, "phase0": 77}, 1: {}})
    res = simulate(compile_program([g], ["g"] * 3).stream())
    assert res.cycles == 90
    assert all(s == 0 for ch in res.samples for s in ch)


@pytest.mark.parametrize("seed", range(5))
def test_compiled_matches_raw(seed):
    gates, circuit = random_circuit(seed, max_gates=16)
    a = simulate(compile_program(gates, circuit).stream(), record_inputs=True)
    b = simulate(blocks(emit_raw_stream(gates, circuit)), record_inputs=True)
    assert a.inputs == b.inputs
    assert a.samples == b.samples
    assert a.waveform_csv() == b.waveform_csv()


def test_quarter_turn_tone_through_pipeline():
    g = GateDefinition("g", 8, {0: {"freq0": QUARTER, "amp0": 100}})
    res = simulate(compile_program([g], ["g"]).stream())
    assert res.samples[0] == [0, 100, 0, -100] * 2


def test_frame_rotation_applies_to_next_gate():
    rot = GateDefinition("rot", 4, {0: {"amp0": 10, "frame0": {"value": QUARTER, "mode": "final"}}})
    probe = GateDefinition("probe", 2, {0: {"amp0": 10}})
    res = simulate(compile_program([rot, probe], ["rot", "probe", "probe"]).stream())
    assert res.samples[0] == [0, 0, 0, 0, 10, 10, 10, 10]


def test_phase_sync_restores_free_running_phase():
    f = 3 * (1 << 33) + 17
    g_other = GateDefinition("other", 13, {0: {"freq0": 5 * (1 << 30)}})
    back = GateDefinition("back", 20, {0: {"freq0": {"value": f, "sync": True}, "amp0": 1}})
    sim = Simulator()
    sim.load(compile_program([g_other, back], ["other", "back"]).stream())
    sim.run()
    ref = (33 * f) % (1 << 40)
    assert sim.dds[0].tones[0].phase_acc == ref


def test_mid_circuit_reprogram():
    g = GateDefinition("g", 5, {0: {"amp0": 7, "freq0": QUARTER}})
    prog = compile_program([g], ["g"])
    update = delta_update(prog, "g", "amp0", 9)
    stream = prog.stream() + blocks(update) + [encode_word(w) for w in prog.sequencing_words]
    res = simulate(stream)
    # the phase accumulator keeps running across the reprogram
    assert res.samples[0] == [0, 7, 0, -7, 0, 9, 0, -9, 0, 9]


def test_underrun_and_trigger_cycle():
    g = GateDefinition("g", 3, {0: {"amp0": 1}})
    res = simulate(compile_program([g], ["g"]).stream(), trigger_cycle=8, cycles=6)
    assert res.trigger_cycle == 8 and res.cycles == 6
    under = [e for e in res.events if e.kind == "underrun" and e.channel == 0]
    assert len(under) == 8 and {e.cycle for e in under} == {11}
    assert res.samples[0] == [0.0] * 6


def test_backpressure_logged():
    g = GateDefinition("g", 8, {0: {"amp0": 1, "freq0": QUARTER}})
    res = simulate(compile_program([g], ["g"] * 10).stream(), fifo_depth=2)
    assert any(e.kind == "backpressure" for e in res.events)
    assert res.samples[0] == [0, 1, 0, -1] * 20


def test_feed_rate_limits_short_gates():
    # one segment per clock: a 1-cycle gate with 8 segments cannot stream back to back
    g = GateDefinition("g", 1, {0: {"amp0": 1}})
    res = simulate(compile_program([g], ["g"] * 10).stream(), fifo_depth=1)
    assert res.cycles > 10
    assert any(e.kind == "underrun" for e in res.events)


def test_crosstalk_cancels_neighbor():
    tone = {"freq0": 7 * (1 << 33) + 3, "amp0": 1000}
    g = GateDefinition("g", 50, {0: tone, 1: {}})
    mixers = {1: CrosstalkMixer([CrosstalkTap(0, crosstalk_scale(0.5), 0)])}
    res = simulate(compile_program([g], ["g"]).stream(), crosstalk=mixers)
    for a, b in zip(res.samples[0], res.samples[1]):
        assert b == pytest.approx(0.5 * a, abs=1e-9)


def test_deterministic_csv():
    gates, circuit = random_circuit(11, max_gates=8)
    stream = compile_program(gates, circuit).stream()
    assert simulate(stream).waveform_csv() == simulate(stream).waveform_csv()


def test_feedforward_through_pipeline():
    g = GateDefinition("g", 4, {0: {"freq0": {"value": 0, "ffwd": True}, "amp0": 5}})
    res = simulate(compile_program([g], ["g"]).stream(), ffwd_phase=phase_from_turns(0.25), harmonic=1)
    assert res.samples[0] == [5, 5, 5, 5]
