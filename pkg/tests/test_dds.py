import math

import pytest
from hypothesis import given, strategies as st

from ionseq.dds import (
    CrosstalkMixer,
    CrosstalkTap,
    DdsCore,
    ToneInputs,
    crosstalk_scale,
    ftw_from_hz,
    phase_from_turns,
    sin_phase,
)
from ionseq.wordcodec import FRAME_ACCUMULATE, FRAME_FINAL_ONLY

N = 40
MOD = 1 << N
OFF = ToneInputs()


def run(core, tone0, steps):
    return [core.step((tone0, OFF)) for _ in range(steps)]


def test_zero_ftw_gives_zero():
    core = DdsCore()
    assert run(core, ToneInputs(amplitude=1000), 5) == [0.0] * 5


def test_quarter_turn_ftw():
    core = DdsCore()
    assert run(core, ToneInputs(ftw=MOD // 4, amplitude=7), 8) == [0, 7, 0, -7] * 2


def test_two_tone_sum_identity():
    core = DdsCore()
    f = ftw_from_hz(3.1e6, 409.6e6)
    a = 1000
    q = phase_from_turns(0.25)
    t0 = ToneInputs(ftw=f, amplitude=a, phase_word=q)
    t1 = ToneInputs(ftw=(-f) % MOD, amplitude=a, phase_word=q)
    for k in range(200):
        got = core.step((t0, t1))
        theta = 2 * math.pi * ((k * f) % MOD) / MOD
        assert got == pytest.approx(2 * a * math.cos(theta), abs=1e-6)


def test_both_amplitudes_zero_is_silent():
    core = DdsCore()
    t = ToneInputs(ftw=12345, phase_word=999, amplitude=0)
    assert all(core.step((t, t)) == 0 for _ in range(50))


def test_sin_phase_exact_quadrants():
    assert sin_phase(0) == 1
    assert sin_phase(MOD // 4) == 1j
    assert sin_phase(MOD // 2) == -1
    assert sin_phase(3 * MOD // 4) == -1j


@given(st.integers(0, MOD - 1))
def test_sin_phase_matches_float(p):
    z = sin_phase(p)
    ang = 2 * math.pi * p / MOD
    assert z.imag == pytest.approx(math.sin(ang), abs=1e-9)
    assert z.real == pytest.approx(math.cos(ang), abs=1e-9)


def test_sync_at_zero_counter():
    core = DdsCore()
    core.tones[0].phase_acc = 12345
    core.sync_phase(0, 999)
    assert core.tones[0].phase_acc == 0


@given(st.integers(0, 1 << 20), st.integers(1, MOD - 1), st.integers(0, 200))
def test_sync_then_free_run(c, f, k):
    core = DdsCore()
    core.global_counter = c
    t = ToneInputs(ftw=f, sync_trigger=True)
    core.step((t, OFF))
    for _ in range(k):
        core.step((t._replace(sync_trigger=False), OFF))
    assert core.tones[0].phase_acc == (c + k + 1) * f % MOD


@given(st.integers(1, MOD - 1), st.integers(1, MOD - 1), st.integers(1, 50),
       st.integers(1, 50), st.integers(0, 50))
def test_switch_and_resync_matches_free_running(f, g, n1, n2, n3):
    core = DdsCore()
    ref = DdsCore()
    plan = [(f, False)] * n1 + [(g, False)] * n2 + [(f, True)] + [(f, False)] * n3
    for ftw, sync in plan:
        core.step((ToneInputs(ftw=ftw, amplitude=1, sync_trigger=sync), OFF))
    for _ in plan:
        ref.step((ToneInputs(ftw=f, amplitude=1), OFF))
    assert core.tones[0].phase_acc == ref.tones[0].phase_acc


@given(st.integers(1, 255), st.integers(0, 2000))
def test_small_width_counter_wrap(f, start):
    core = DdsCore(phase_bits=8, counter_bits=8)
    core.global_counter = start % 256
    for k in range(600):
        sync = k % 97 == 0
        core.step((ToneInputs(ftw=f, sync_trigger=sync), OFF))
        if sync:
            assert core.tones[0].phase_acc == ((start + k) % 256 * f + f) % 256
    assert core.tones[0].phase_acc == (start + 600) * f % 256


def test_frame_zero_value_is_noop():
    core = DdsCore()
    core.apply_frame_rotation(0, 0)
    assert core.tones[0].frame_acc == 0


def test_frame_additivity():
    core = DdsCore()
    q = phase_from_turns(0.25)
    core.apply_frame_rotation(1, q)
    core.apply_frame_rotation(1, q)
    assert core.tones[1].frame_acc == MOD // 2
    core.apply_frame_rotation(1, 3 * q)
    assert core.tones[1].frame_acc == MOD // 4


def test_final_only_accumulates_last_sample():
    core = DdsCore()
    ramp = [0, 10, 20, 30]
    flags = FRAME_ACCUMULATE | FRAME_FINAL_ONLY
    for i, v in enumerate(ramp):
        core.step((ToneInputs(frame_input=v, frame_flags=flags, frame_end=i == 3), OFF))
    assert core.tones[0].frame_acc == 30


def test_integral_accumulates_sum():
    core = DdsCore()
    ramp = [1, 2, 3]
    for i, v in enumerate(ramp):
        core.step((ToneInputs(frame_input=v, frame_flags=FRAME_ACCUMULATE, frame_end=i == 2), OFF))
    assert core.tones[0].frame_acc == 6


def test_frame_does_not_touch_current_pulse():
    core = DdsCore()
    flags = FRAME_ACCUMULATE | FRAME_FINAL_ONLY
    q = phase_from_turns(0.25)
    out = []
    for i in range(4):
        out.append(core.step((ToneInputs(amplitude=5, frame_input=q, frame_flags=flags,
                                         frame_end=i == 3), OFF)))
    assert out == [0, 0, 0, 0]
    assert core.step((ToneInputs(amplitude=5), OFF)) == 5


def test_feedforward():
    core = DdsCore(ffwd_phase=123, harmonic=0)
    assert core.apply_feedforward() == 0
    assert core.apply_feedforward(777, 1) == 777
    p = MOD - 5
    assert core.apply_feedforward(p, 4) == 2 * core.apply_feedforward(p, 2) % MOD


def test_feedforward_enters_phase():
    core = DdsCore(ffwd_phase=MOD // 4, harmonic=1)
    assert core.step((ToneInputs(amplitude=3, ffwd_enable=True), OFF)) == 3
    assert core.step((ToneInputs(amplitude=3), OFF)) == 0


def test_counter_shared_step():
    cores = [DdsCore() for _ in range(3)]
    for _ in range(10):
        for c in cores:
            c.step((OFF, OFF))
    assert {c.global_counter for c in cores} == {10}


def test_zero_scale_passes_delayed_own():
    mixer = CrosstalkMixer([CrosstalkTap(1, 0j, 0)], primary_delay=2)
    own = [1.0, 2.0, 3.0, 4.0]
    out = [mixer.mix(s, [0j, 5 + 5j]) for s in own]
    assert out == [0.0, 0.0, 1.0, 2.0]


def _neighbor_tone(f, n):
    core = DdsCore()
    t = ToneInputs(ftw=f, amplitude=1000)
    sec = []
    for _ in range(n):
        core.step((t, OFF))
        sec.append(core.secondary)
    return sec


def test_cancellation_at_aligned_delay():
    g = 0.05
    sec = _neighbor_tone(ftw_from_hz(7e6, 409.6e6), 100)
    mixer = CrosstalkMixer([CrosstalkTap(0, crosstalk_scale(-g), 0)])
    for z in sec:
        assert mixer.mix(g * z.imag, [z]) == pytest.approx(0.0, abs=1e-9)


def test_phase_offset_scale():
    # scale with a quarter-turn phase maps the neighbor's sine onto its cosine
    sec = _neighbor_tone(ftw_from_hz(5e6, 409.6e6), 40)
    mixer = CrosstalkMixer([CrosstalkTap(0, crosstalk_scale(1.0, 0.25), 0)])
    for z in sec:
        assert mixer.mix(0.0, [z]) == pytest.approx(z.real, abs=1e-9)


def test_misaligned_residual_grows_with_frequency():
    g = 0.1
    peaks = []
    for mhz in (1, 5, 20, 60):
        sec = _neighbor_tone(ftw_from_hz(mhz * 1e6, 409.6e6), 400)
        mixer = CrosstalkMixer([CrosstalkTap(0, crosstalk_scale(-g), 1)])
        res = [mixer.mix(g * z.imag, [z]) for z in sec]
        peaks.append(max(abs(r) for r in res[1:]))
    assert all(p > 0 for p in peaks)
    assert peaks == sorted(peaks)
