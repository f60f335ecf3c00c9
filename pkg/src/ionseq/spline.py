"""Cycle-level model of the cubic forward-difference spline engines.

Each engine holds four 40-bit accumulators.  On every clock it emits
``a0`` and then updates ``a0 += a1; a1 += a2; a2 += a3`` with wrapping
two's-complement arithmetic, so a segment loaded with the value and first
three forward differences of a cubic replays that cubic exactly.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .errors import FieldRangeError
from .wordcodec import COEFF_BITS, COEFF_MAX, COEFF_MIN, NUM_PARAMS, PARAM_NAMES, SplineSegment

_MASK = (1 << COEFF_BITS) - 1
_SIGN = 1 << (COEFF_BITS - 1)
_MOD = 1 << COEFF_BITS

DEFAULT_FIFO_DEPTH = 64


def wrap(value: int) -> int:
    """Reduce to signed 40-bit two's complement."""
    return ((value + _SIGN) & _MASK) - _SIGN


def to_forward_difference(c0, c1=0, c2=0, c3=0) -> tuple[int, int, int, int]:
    """Forward differences (U0, U1, U2, U3) of f(k) = c0 + c1 k + c2 k^2 + c3 k^3.

    Exact for integer or rational coefficients; the result must be integral
    and fit a 40-bit lane.
    """
    c0, c1, c2, c3 = (Fraction(c) for c in (c0, c1, c2, c3))
    diffs = (c0, c1 + c2 + c3, 2 * c2 + 6 * c3, 6 * c3)
    out = []
    for n, d in enumerate(diffs):
        if d.denominator != 1:
            raise FieldRangeError(f"u{n}", d, detail="forward difference is not an integer")
        if not COEFF_MIN <= d <= COEFF_MAX:
            raise FieldRangeError(f"u{n}", int(d), COEFF_BITS)
        out.append(int(d))
    return tuple(out)


def replay(seg: SplineSegment) -> list[int]:
    """All tau samples of one segment, computed the way an engine would."""
    a0, a1, a2, a3 = seg.u0, seg.u1, seg.u2, seg.u3
    out = []
    for _ in range(seg.tau):
        out.append(a0)
        a0 = ((a0 + a1 + _SIGN) & _MASK) - _SIGN
        a1 = ((a1 + a2 + _SIGN) & _MASK) - _SIGN
        a2 = ((a2 + a3 + _SIGN) & _MASK) - _SIGN
    return out


class SplineEngine:
    """One interpolator with its segment FIFO.

    After each :meth:`step` the attributes ``meta`` (metadata of the
    segment that produced the sample, or ``None`` during underrun),
    ``loaded`` (the sample is the first of a segment) and ``at_end`` (the
    sample is the last of a segment) describe the emitted sample.
    """

    __slots__ = ("a0", "a1", "a2", "a3", "remaining", "fifo", "depth", "enabled",
                 "last", "meta", "loaded", "at_end", "starved")

    def __init__(self, depth: int = DEFAULT_FIFO_DEPTH):
        self.a0 = self.a1 = self.a2 = self.a3 = 0
        self.remaining = 0
        self.fifo: deque[SplineSegment] = deque()
        self.depth = depth
        self.enabled = False
        self.last = 0
        self.meta = None
        self.loaded = False
        self.at_end = False
        self.starved = False

    @property
    def full(self) -> bool:
        return len(self.fifo) >= self.depth

    @property
    def busy(self) -> bool:
        return self.remaining > 0 or bool(self.fifo)

    def push(self, seg: SplineSegment) -> bool:
        """Queue a segment; returns False (backpressure) when the FIFO is full."""
        if len(self.fifo) >= self.depth:
            return False
        self.fifo.append(seg)
        return True

    def step(self) -> int:
        """Advance one clock and return the emitted sample.

        With nothing to play the engine holds its last sample and sets
        ``starved``.
        """
        loaded = False
        if self.remaining == 0:
            if not self.fifo:
                self.starved = True
                self.meta = None
                self.loaded = self.at_end = False
                return self.last
            seg = self.fifo.popleft()
            self.a0, self.a1, self.a2, self.a3 = seg.u0, seg.u1, seg.u2, seg.u3
            self.remaining = seg.tau
            self.meta = seg.metadata
            loaded = True
        self.starved = False
        self.loaded = loaded
        out = self.a0
        a1, a2 = self.a1, self.a2
        self.a0 = ((out + a1 + _SIGN) & _MASK) - _SIGN
        self.a1 = ((a1 + a2 + _SIGN) & _MASK) - _SIGN
        self.a2 = ((a2 + self.a3 + _SIGN) & _MASK) - _SIGN
        self.remaining -= 1
        self.at_end = self.remaining == 0
        self.last = out
        return out


@dataclass(frozen=True)
class Event:
    cycle: int
    channel: int
    kind: str  # "underrun" or "backpressure"
    engine: int

    def as_dict(self) -> dict:
        return {"cycle": self.cycle, "channel": self.channel, "kind": self.kind,
                "engine": PARAM_NAMES[self.engine]}


class EngineBank:
    """The eight engines of one channel with their shared feed path.

    Routed segments wait in a pending queue and are moved into engine
    FIFOs at most one per clock, in arrival order.  A full target FIFO
    stalls the feed (head-of-line) and records a backpressure event.
    Engines only run once :meth:`trigger` has been called.
    """

    def __init__(self, channel: int = 0, fifo_depth: int = DEFAULT_FIFO_DEPTH,
                 record: bool = False):
        self.channel = channel
        self.engines = [SplineEngine(fifo_depth) for _ in range(NUM_PARAMS)]
        self.pending: deque[tuple[int, SplineSegment]] = deque()
        self.triggered = False
        self.cycle = 0
        self.events: list[Event] = []
        self.blocked = False
        self.record = record
        self.traces: list[list[int]] = [[] for _ in range(NUM_PARAMS)]
        self.trace_start: int | None = None

    def feed(self, routed) -> None:
        """Queue ``(engine_index, segment)`` pairs for delivery."""
        self.pending.extend(routed)

    @property
    def idle_or_blocked(self) -> bool:
        return not self.pending or self.blocked

    @property
    def drained(self) -> bool:
        return not self.pending and not any(e.busy for e in self.engines)

    def trigger(self) -> None:
        self.triggered = True
        for e in self.engines:
            e.enabled = True
        if self.trace_start is None:
            self.trace_start = self.cycle

    def _feed_tick(self) -> None:
        if not self.pending:
            self.blocked = False
            return
        engine, seg = self.pending[0]
        if self.engines[engine].push(seg):
            self.pending.popleft()
            self.blocked = False
        else:
            if not self.blocked:
                self.events.append(Event(self.cycle, self.channel, "backpressure", engine))
            self.blocked = True

    def tick(self) -> list[int] | None:
        """One system clock: feed, then step all engines if triggered.

        Returns the eight samples (bank order) or None before the trigger.
        """
        self._feed_tick()
        samples = None
        if self.triggered:
            samples = []
            for idx, e in enumerate(self.engines):
                was_starved = e.starved
                samples.append(e.step())
                if e.starved and not was_starved:
                    self.events.append(Event(self.cycle, self.channel, "underrun", idx))
            if self.record:
                for trace, s in zip(self.traces, samples):
                    trace.append(s)
        self.cycle += 1
        return samples

    def export_trace_csv(self, path, engine: int) -> None:
        """Write one engine's recorded samples as ``cycle,value`` rows."""
        start = self.trace_start or 0
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cycle", "value"])
            for k, v in enumerate(self.traces[engine]):
                writer.writerow([start + k, v])
