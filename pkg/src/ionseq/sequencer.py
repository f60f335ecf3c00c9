"""Full datapath simulation: word stream -> LUTs -> spline engines -> DDS."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .dds import CrosstalkMixer, DdsCore, ToneInputs
from .lutstore import NUM_CHANNELS, LutStore
from .spline import DEFAULT_FIFO_DEPTH, EngineBank, Event
from .wordcodec import FFWD_ENABLE, PHASE_SYNC


@dataclass
class SimResult:
    trigger_cycle: int | None
    samples: list[list[float]]
    inputs: list[list[tuple[int, ...]]]
    events: list[Event] = field(default_factory=list)

    @property
    def cycles(self) -> int:
        return len(self.samples[0]) if self.samples else 0

    def waveform_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["sample_index", "channel", "sample"])
        for k in range(self.cycles):
            for ch, chan in enumerate(self.samples):
                writer.writerow([k, ch, repr(chan[k])])
        return buf.getvalue()


def _tone_inputs(bank: EngineBank, samples: list[int], tone: int) -> ToneInputs:
    base = 4 * tone
    freq_e = bank.engines[base]
    frame_e = bank.engines[base + 3]
    fmeta = freq_e.meta or 0
    return ToneInputs(
        ftw=samples[base],
        amplitude=samples[base + 1],
        phase_word=samples[base + 2],
        frame_input=samples[base + 3],
        sync_trigger=bool(freq_e.loaded and fmeta & PHASE_SYNC),
        ffwd_enable=bool(fmeta & FFWD_ENABLE),
        frame_flags=frame_e.meta or 0,
        frame_end=frame_e.at_end,
    )


class Simulator:
    """Cycle-stepped model of all channels sharing one clock and trigger.

    Words are ingested in stream order before the clock starts, so a
    programming word only affects gates read out by later sequencing
    words.  The global trigger fires at `trigger_cycle`, or by default on
    the first cycle where every channel's feed path is either empty or
    stalled on a full FIFO.
    """

    def __init__(self, num_channels: int = NUM_CHANNELS, fifo_depth: int = DEFAULT_FIFO_DEPTH,
                 phase_bits: int = 40, crosstalk: dict[int, CrosstalkMixer] | None = None,
                 ffwd_phase: int = 0, harmonic: int = 0, trigger_cycle: int | None = None,
                 with_dds: bool = True, record_inputs: bool = False):
        self.store = LutStore(num_channels)
        self.banks = [EngineBank(ch, fifo_depth) for ch in range(num_channels)]
        self.dds = [DdsCore(phase_bits, ffwd_phase=ffwd_phase, harmonic=harmonic)
                    for _ in range(num_channels)]
        self.crosstalk = crosstalk or {}
        self.trigger_cycle = trigger_cycle
        self.with_dds = with_dds
        self.record_inputs = record_inputs
        self.cycle = 0

    def load(self, blocks) -> None:
        for block in blocks:
            for ch, engine, seg in self.store.process_word(block):
                self.banks[ch].pending.append((engine, seg))

    def _should_trigger(self) -> bool:
        if self.trigger_cycle is not None:
            return self.cycle >= self.trigger_cycle
        return all(b.idle_or_blocked for b in self.banks)

    def run(self, cycles: int | None = None, max_cycles: int = 10_000_000) -> SimResult:
        """Advance the clock.

        With `cycles` given, exactly that many post-trigger samples are
        produced; otherwise the run stops once every engine has drained.
        """
        n_ch = len(self.banks)
        samples: list[list[float]] = [[] for _ in range(n_ch)]
        inputs: list[list[tuple[int, ...]]] = [[] for _ in range(n_ch)]
        trigger_at = None
        produced = 0
        while self.cycle < max_cycles:
            if trigger_at is None and self._should_trigger():
                trigger_at = self.cycle
                for b in self.banks:
                    b.trigger()
            if trigger_at is not None:
                if cycles is None and all(b.drained for b in self.banks):
                    break
                if cycles is not None and produced >= cycles:
                    break
            outs = [b.tick() for b in self.banks]
            self.cycle += 1
            if outs[0] is None:
                continue
            produced += 1
            primaries = []
            for ch, (bank, s) in enumerate(zip(self.banks, outs)):
                if self.record_inputs:
                    inputs[ch].append(tuple(s))
                if self.with_dds:
                    tones = (_tone_inputs(bank, s, 0), _tone_inputs(bank, s, 1))
                    primaries.append(self.dds[ch].step(tones))
            if self.with_dds:
                secondaries = [d.secondary for d in self.dds]
                for ch in range(n_ch):
                    mixer = self.crosstalk.get(ch)
                    out = mixer.mix(primaries[ch], secondaries) if mixer else primaries[ch]
                    samples[ch].append(out)
        events = sorted((e for b in self.banks for e in b.events),
                        key=lambda e: (e.cycle, e.channel, e.kind, e.engine))
        return SimResult(trigger_at, samples, inputs, events)


def simulate(blocks, **kwargs) -> SimResult:
    cycles = kwargs.pop("cycles", None)
    sim = Simulator(**kwargs)
    sim.load(blocks)
    return sim.run(cycles)
