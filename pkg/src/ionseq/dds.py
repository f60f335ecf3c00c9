"""Dual-tone DDS with global phase sync, frame rotation, feedforward and crosstalk mixing.

Phases and frequency words are N-bit modular integers (N = 40 by default).
The sine itself is evaluated in floating point.
"""

from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .wordcodec import FRAME_ACCUMULATE, FRAME_FINAL_ONLY

PHASE_BITS = 40
COUNTER_BITS = 64


def ftw_from_hz(freq_hz: float, clock_hz: float, bits: int = PHASE_BITS) -> int:
    """Frequency tuning word for `freq_hz` at sample clock `clock_hz`."""
    return round(freq_hz / clock_hz * (1 << bits)) % (1 << bits)


def phase_from_turns(turns: float, bits: int = PHASE_BITS) -> int:
    return round(turns * (1 << bits)) % (1 << bits)


def sin_phase(phase: int, bits: int = PHASE_BITS) -> complex:
    """exp(2*pi*i*phase/2^bits), exact at multiples of a quarter turn."""
    quadrant = (phase >> (bits - 2)) & 3
    rem = phase & ((1 << (bits - 2)) - 1)
    z = cmath.exp(1j * (math.tau * rem / (1 << bits))) if rem else 1 + 0j
    return z * (1, 1j, -1, -1j)[quadrant]


class ToneInputs(NamedTuple):
    """Per-cycle inputs of one tone, as produced by its spline engines."""

    ftw: int = 0
    phase_word: int = 0
    amplitude: int = 0
    frame_input: int = 0
    sync_trigger: bool = False
    ffwd_enable: bool = False
    frame_flags: int = 0
    frame_end: bool = False


@dataclass
class ToneState:
    phase_acc: int = 0
    frame_acc: int = 0
    frame_partial: int = 0


class DdsCore:
    """One channel's DDS.

    ``global_counter`` advances once per :meth:`step`; a simulator running
    several channels steps them together so their counters agree.
    """

    def __init__(self, phase_bits: int = PHASE_BITS, counter_bits: int = COUNTER_BITS,
                 ffwd_phase: int = 0, harmonic: int = 0):
        self.bits = phase_bits
        self.mod = 1 << phase_bits
        self.counter_mod = 1 << counter_bits
        self.global_counter = 0
        self.tones = [ToneState(), ToneState()]
        self.ffwd_phase = ffwd_phase
        self.harmonic = harmonic
        self.secondary = 0j

    def sync_phase(self, tone: int, ftw: int) -> None:
        """Load the phase a free-running DDS at `ftw` would have now."""
        self.tones[tone].phase_acc = (self.global_counter * ftw) % self.mod

    def apply_frame_rotation(self, tone: int, frame_value: int) -> None:
        st = self.tones[tone]
        st.frame_acc = (st.frame_acc + frame_value) % self.mod

    def accumulate_frame(self, tone: int, sample: int, flags: int, at_end: bool) -> None:
        """Frame bookkeeping for one emitted frame-engine sample.

        With FRAME_ACCUMULATE set the segment contributes to the frame
        accumulator when it ends: only its final sample if FRAME_FINAL_ONLY
        is set, otherwise the sum of all its samples.
        """
        if not flags & FRAME_ACCUMULATE:
            return
        st = self.tones[tone]
        if flags & FRAME_FINAL_ONLY:
            if at_end:
                self.apply_frame_rotation(tone, sample)
        else:
            st.frame_partial += sample
            if at_end:
                self.apply_frame_rotation(tone, st.frame_partial)
                st.frame_partial = 0

    def apply_feedforward(self, ffwd_phase: int | None = None, harmonic: int | None = None) -> int:
        """Phase offset ffwd_phase * harmonic (mod 2^N)."""
        p = self.ffwd_phase if ffwd_phase is None else ffwd_phase
        h = self.harmonic if harmonic is None else harmonic
        return (p * h) % self.mod

    def step(self, inputs: Sequence[ToneInputs]) -> float:
        """Produce one output sample from both tones and advance the clock.

        The emitted sample uses the accumulator value at this tick; the
        accumulator then advances by the FTW.  Frame rotations recorded at
        this tick affect later samples only.
        """
        mod = self.mod
        total = 0j
        for tone, inp in enumerate(inputs):
            st = self.tones[tone]
            ftw = inp.ftw % mod
            if inp.sync_trigger:
                self.sync_phase(tone, ftw)
            phase = st.phase_acc + inp.phase_word + st.frame_acc
            if inp.ffwd_enable:
                phase += self.apply_feedforward()
            total += inp.amplitude * sin_phase(phase % mod, self.bits)
            st.phase_acc = (st.phase_acc + ftw) % mod
            self.accumulate_frame(tone, inp.frame_input, inp.frame_flags, inp.frame_end)
        self.global_counter = (self.global_counter + 1) % self.counter_mod
        self.secondary = total
        return total.imag


@dataclass
class CrosstalkTap:
    neighbor: int
    scale: complex
    delay: int = 0


def crosstalk_scale(amplitude: float, phase_turns: float = 0.0) -> complex:
    return amplitude * cmath.exp(1j * math.tau * phase_turns)


@dataclass
class CrosstalkMixer:
    """Adds scaled, delayed neighbor signals to a channel's own output.

    Neighbor signals are the complex secondary outputs of their DDS cores;
    the complex scale applies an amplitude and phase adjustment and the
    real (sine) projection is added.  The channel's own sample passes
    through a delay line of `primary_delay` samples.
    """

    taps: list[CrosstalkTap] = field(default_factory=list)
    primary_delay: int = 0

    def __post_init__(self):
        self._own = deque([0.0] * self.primary_delay)
        self._lines = [deque([0j] * t.delay) for t in self.taps]

    def mix(self, own: float, secondaries: Sequence[complex]) -> float:
        self._own.append(own)
        out = self._own.popleft()
        for tap, line in zip(self.taps, self._lines):
            line.append(secondaries[tap.neighbor])
            out += (tap.scale * line.popleft()).imag
        return out
