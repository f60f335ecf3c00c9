"""Pulse compiler: gate definitions -> deduplicated LUT contents and word streams."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import CapacityError, ConfigError, FieldRangeError, GateLookupError
from .lutstore import GLUT_DEPTH, MLUT_DEPTH, NUM_CHANNELS, PLUT_DEPTH
from .wordcodec import (
    COEFF_MAX,
    COEFF_MIN,
    KIND_FRAME,
    KIND_FREQ,
    MAX_GATE_IDS,
    MAX_GLUT_RECORDS,
    MAX_MLUT_RECORDS,
    PARAM_NAMES,
    GateSequenceWord,
    GlutWrite,
    MlutWrite,
    PlutWrite,
    ProgrammingWord,
    RawSegmentWord,
    SplineSegment,
    encode_word,
    make_metadata,
)
from .spline import wrap

FRAME_MODES = ("final", "integral", "none")


@dataclass(frozen=True)
class ParamSpec:
    """Trajectory of one waveform parameter over a gate.

    Either a constant `value` or a list of `knots` ``(cycle, value)``
    running from cycle 0 to the gate duration.  `frame_mode` applies to
    frame parameters, `sync` and `ffwd` to frequency parameters.
    """

    value: int = 0
    knots: tuple[tuple[int, int], ...] | None = None
    frame_mode: str = "final"
    sync: bool = False
    ffwd: bool = False

    def __post_init__(self):
        if self.frame_mode not in FRAME_MODES:
            raise ConfigError(f"frame mode {self.frame_mode!r} not in {FRAME_MODES}")

    @classmethod
    def parse(cls, obj) -> "ParamSpec":
        if isinstance(obj, cls):
            return obj
        if isinstance(obj, (int, float)):
            return cls(value=int(obj))
        if not isinstance(obj, dict):
            raise ConfigError(f"cannot read parameter spec {obj!r}")
        unknown = set(obj) - {"value", "knots", "mode", "sync", "ffwd"}
        if unknown:
            raise ConfigError(f"unknown parameter keys {sorted(unknown)}")
        knots = obj.get("knots")
        if knots is not None:
            knots = tuple((int(t), int(v)) for t, v in knots)
        return cls(value=int(obj.get("value", 0)), knots=knots,
                   frame_mode=obj.get("mode", "final"),
                   sync=bool(obj.get("sync", False)), ffwd=bool(obj.get("ffwd", False)))

    def knot_list(self, duration: int) -> list[tuple[int, int]]:
        if self.knots is None:
            return [(0, self.value), (duration, self.value)]
        return list(self.knots)


def _param_index(name: str) -> int:
    try:
        return PARAM_NAMES.index(name)
    except ValueError:
        raise GateLookupError(f"unknown parameter {name!r}; expected one of {PARAM_NAMES}") from None


@dataclass
class GateDefinition:
    name: str
    duration: int
    channels: dict[int, dict[str, ParamSpec]] = field(default_factory=lambda: {0: {}})

    def __post_init__(self):
        if self.duration < 1:
            raise FieldRangeError("duration", self.duration, detail="must be >= 1 cycle")
        chans = {}
        for ch, params in self.channels.items():
            ch = int(ch)
            if not 0 <= ch < NUM_CHANNELS:
                raise FieldRangeError("channel", ch, detail="0..7")
            chans[ch] = {}
            for pname, spec in params.items():
                _param_index(pname)
                spec = ParamSpec.parse(spec)
                _check_knots(spec.knot_list(self.duration), self.duration)
                chans[ch][pname] = spec
        self.channels = dict(sorted(chans.items()))

    @classmethod
    def from_dict(cls, d: dict) -> "GateDefinition":
        unknown = set(d) - {"name", "duration", "channels"}
        if unknown:
            raise ConfigError(f"unknown gate keys {sorted(unknown)}")
        return cls(d["name"], int(d["duration"]), d.get("channels", {0: {}}))

    def param(self, channel: int, name: str) -> ParamSpec:
        return self.channels[channel].get(name, ParamSpec())

    def segments(self, channel: int) -> list[SplineSegment]:
        """Segments of every parameter on `channel`, ordered by start cycle then engine."""
        timed = []
        for idx, pname in enumerate(PARAM_NAMES):
            spec = self.param(channel, pname)
            segs = fit_segments(spec.knot_list(self.duration), self.duration)
            kind = idx % 4
            start = 0
            for n, seg in enumerate(segs):
                last = n == len(segs) - 1
                meta = make_metadata(
                    idx,
                    frame_accumulate=kind == KIND_FRAME and (
                        spec.frame_mode == "integral" or (spec.frame_mode == "final" and last)),
                    frame_final_only=kind == KIND_FRAME and spec.frame_mode == "final",
                    phase_sync=kind == KIND_FREQ and spec.sync and n == 0,
                    ffwd_enable=kind == KIND_FREQ and spec.ffwd,
                )
                timed.append((start, idx, replace(seg, metadata=meta)))
                start += seg.tau
        timed.sort(key=lambda x: (x[0], x[1]))
        return [seg for _, _, seg in timed]


def _check_knots(knots, duration):
    if len(knots) < 2:
        raise ConfigError("a knot list needs at least two knots")
    ts = [t for t, _ in knots]
    if ts[0] != 0 or ts[-1] != duration:
        raise ConfigError(f"knots must start at 0 and end at duration {duration}, got {ts[0]}..{ts[-1]}")
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ConfigError("knot times must be strictly increasing")


def fit_segments(knots: Sequence[tuple[int, int]], duration: int,
                 metadata: int = 0) -> list[SplineSegment]:
    """Natural cubic spline through `knots`, one segment per knot interval.

    Each segment starts exactly on its knot value.  U3 and U2 are rounded
    from the real spline; U1 is then chosen so the segment lands as close
    as possible to the next knot.  Two knots give a straight line and a
    constant gives a single segment with U1 = U2 = U3 = 0.
    """
    knots = [(int(t), int(v)) for t, v in knots]
    _check_knots(knots, duration)
    ts = np.array([t for t, _ in knots], dtype=float)
    vs = [v for _, v in knots]
    n = len(knots) - 1
    if n == 1:
        coeffs = [(0.0, 0.0)]
    else:
        cs = CubicSpline(ts, np.array(vs, dtype=float), bc_type="natural")
        coeffs = [(cs.c[0, i], cs.c[1, i]) for i in range(n)]
    segs = []
    for i, (c3, c2) in enumerate(coeffs):
        tau = knots[i + 1][0] - knots[i][0]
        v0, v1 = vs[i], vs[i + 1]
        u3 = int(round(float(6 * c3)))
        u2 = int(round(float(2 * c2 + 6 * c3)))
        rest = v1 - v0 - math.comb(tau, 2) * u2 - math.comb(tau, 3) * u3
        u1 = rest // tau if rest % tau == 0 else int(round(rest / tau))
        for name, u in (("u1", u1), ("u2", u2), ("u3", u3)):
            if not COEFF_MIN <= u <= COEFF_MAX:
                raise FieldRangeError(name, u, 40,
                                      detail=f"knot interval {knots[i][0]}..{knots[i + 1][0]}")
        segs.append(SplineSegment(metadata=metadata, tau=tau, u3=u3, u2=u2, u1=u1, u0=wrap(v0)))
    return segs


@dataclass
class ChannelAllocation:
    """LUT contents assigned to one channel."""

    plut: list[SplineSegment] = field(default_factory=list)
    plut_index: dict[SplineSegment, int] = field(default_factory=dict)
    mlut: list[int] = field(default_factory=list)
    glut: dict[int, tuple[int, int]] = field(default_factory=dict)
    refs: Counter = field(default_factory=Counter)

    def intern(self, seg: SplineSegment) -> tuple[int, bool]:
        """PLUT address of `seg`, allocating if new; returns (address, allocated)."""
        addr = self.plut_index.get(seg)
        if addr is not None:
            return addr, False
        if len(self.plut) >= PLUT_DEPTH:
            raise CapacityError("PLUT", len(self.plut) + 1, PLUT_DEPTH)
        addr = len(self.plut)
        self.plut.append(seg)
        self.plut_index[seg] = addr
        return addr, True

    def append_range(self, segs: Sequence[SplineSegment]) -> tuple[int, int, list[int]]:
        """Map `segs` to a fresh contiguous MLUT range; returns (start, end, new PLUT addrs)."""
        if len(self.mlut) + len(segs) > MLUT_DEPTH:
            raise CapacityError("MLUT", len(self.mlut) + len(segs), MLUT_DEPTH)
        start = len(self.mlut)
        fresh = []
        for seg in segs:
            addr, new = self.intern(seg)
            if new:
                fresh.append(addr)
            self.mlut.append(addr)
            self.refs[addr] += 1
        return start, len(self.mlut) - 1, fresh


def _chunks(seq, size):
    return [seq[i:i + size] for i in range(0, len(seq), size)]


def _mlut_words(entries, mask) -> list[MlutWrite]:
    return [MlutWrite(tuple(c), mask) for c in _chunks(entries, MAX_MLUT_RECORDS)]


@dataclass
class CompiledProgram:
    gates: dict[str, GateDefinition]
    circuit: list[str]
    gate_ids: dict[str, int]
    channels: list[ChannelAllocation]
    programming_words: list[ProgrammingWord]
    sequencing_words: list[GateSequenceWord]

    def words(self) -> list:
        return [*self.programming_words, *self.sequencing_words]

    def stream(self) -> list[int]:
        return [encode_word(w) for w in self.words()]

    @property
    def stats(self) -> dict[str, int]:
        count = Counter(w.target for w in self.programming_words)
        invocations = sum(len(self.gates[name].channels) for name in self.circuit)
        return {
            "plut_words": count["PLUT"],
            "mlut_words": count["MLUT"],
            "glut_words": count["GLUT"],
            "sequence_words": len(self.sequencing_words),
            "total_words": len(self.programming_words) + len(self.sequencing_words),
            # one readout word per gate per channel, without ID packing
            "unpacked_sequence_words": invocations,
            "gate_invocations": len(self.circuit),
        }

    def report(self) -> dict:
        return {
            "stats": self.stats,
            "gate_ids": self.gate_ids,
            "channels": {
                str(ch): {
                    "plut_entries": len(a.plut),
                    "mlut_entries": len(a.mlut),
                    "glut": {str(g): list(r) for g, r in sorted(a.glut.items())},
                }
                for ch, a in enumerate(self.channels) if a.mlut
            },
        }


def _resolve(gates, circuit) -> tuple[dict[str, GateDefinition], list[str]]:
    table = {}
    for g in gates:
        g = g if isinstance(g, GateDefinition) else GateDefinition.from_dict(g)
        if g.name in table:
            raise ConfigError(f"gate {g.name!r} defined twice")
        table[g.name] = g
    circuit = list(circuit)
    for name in circuit:
        if name not in table:
            raise GateLookupError(f"circuit uses undefined gate {name!r}")
    return table, circuit


def compile_program(gates: Iterable[GateDefinition | dict], circuit: Sequence[str]) -> CompiledProgram:
    """Compile a circuit into LUT programming words plus packed sequencing words.

    Gate IDs are assigned densely in order of first use.  PLUT entries are
    deduplicated per channel in first-seen order.
    """
    table, circuit = _resolve(gates, circuit)
    gate_ids: dict[str, int] = {}
    for name in circuit:
        if name not in gate_ids:
            if len(gate_ids) >= GLUT_DEPTH:
                raise CapacityError("GLUT", len(gate_ids) + 1, GLUT_DEPTH)
            gate_ids[name] = len(gate_ids)

    allocs = [ChannelAllocation() for _ in range(NUM_CHANNELS)]
    programming: list[ProgrammingWord] = []
    for ch, alloc in enumerate(allocs):
        mask = 1 << ch
        for name, gid in gate_ids.items():
            gate = table[name]
            if ch in gate.channels:
                start, end, _ = alloc.append_range(gate.segments(ch))
                alloc.glut[gid] = (start, end)
        programming += [PlutWrite(a, seg, mask) for a, seg in enumerate(alloc.plut)]
        programming += _mlut_words(list(enumerate(alloc.mlut)), mask)
        records = [(g, s, e) for g, (s, e) in sorted(alloc.glut.items())]
        programming += [GlutWrite(tuple(c), mask) for c in _chunks(records, MAX_GLUT_RECORDS)]

    per_channel = [[gate_ids[n] for n in circuit if ch in table[n].channels]
                   for ch in range(NUM_CHANNELS)]
    chunked = [_chunks(ids, MAX_GATE_IDS) for ids in per_channel]
    sequencing = []
    for k in range(max((len(c) for c in chunked), default=0)):
        for ch, chunks in enumerate(chunked):
            if k < len(chunks):
                sequencing.append(GateSequenceWord(tuple(chunks[k]), 1 << ch))
    return CompiledProgram(table, circuit, gate_ids, allocs, programming, sequencing)


def emit_raw_stream(gates, circuit: Sequence[str],
                    channels: Iterable[int] | None = None) -> list[RawSegmentWord]:
    """LUT-bypass stream: every segment of every gate, in circuit order."""
    table, circuit = _resolve(gates, circuit)
    allowed = None if channels is None else set(channels)
    words = []
    for name in circuit:
        gate = table[name]
        for ch in gate.channels:
            if allowed is None or ch in allowed:
                words += [RawSegmentWord(seg, 1 << ch) for seg in gate.segments(ch)]
    return words


def delta_update(program: CompiledProgram, gate: str, parameter: str, spec,
                 channel: int | None = None) -> list[ProgrammingWord]:
    """Programming words that change one parameter of a compiled gate.

    Only changed segments are written.  A PLUT entry used by this gate
    alone is overwritten in place; a shared one is left intact and the
    MLUT is repointed.  If the segment count changes, the gate gets a new
    MLUT range at the end of the table and a new GLUT record.  Freed
    entries are not reclaimed.
    """
    if gate not in program.gates:
        raise GateLookupError(f"gate {gate!r} not in program")
    _param_index(parameter)
    spec = ParamSpec.parse(spec)
    old_gate = program.gates[gate]
    targets = sorted(old_gate.channels) if channel is None else [channel]
    new_channels = {ch: dict(p) for ch, p in old_gate.channels.items()}
    for ch in targets:
        if ch not in new_channels:
            raise GateLookupError(f"gate {gate!r} is not defined on channel {ch}")
        new_channels[ch][parameter] = spec
    new_gate = GateDefinition(old_gate.name, old_gate.duration, new_channels)
    gid = program.gate_ids.get(gate)

    words: list[ProgrammingWord] = []
    for ch in targets:
        alloc = program.channels[ch]
        mask = 1 << ch
        new = new_gate.segments(ch)
        if gid is None:
            continue
        start, end = alloc.glut[gid]
        old = [alloc.plut[alloc.mlut[a]] for a in range(start, end + 1)]
        if len(new) == len(old):
            repoint = []
            for i, (o, n) in enumerate(zip(old, new)):
                if o == n:
                    continue
                a = start + i
                p = alloc.mlut[a]
                if alloc.refs[p] == 1 and n not in alloc.plut_index:
                    del alloc.plut_index[o]
                    alloc.plut[p] = n
                    alloc.plut_index[n] = p
                    words.append(PlutWrite(p, n, mask))
                    continue
                q, fresh = alloc.intern(n)
                if fresh:
                    words.append(PlutWrite(q, n, mask))
                alloc.refs[p] -= 1
                alloc.refs[q] += 1
                alloc.mlut[a] = q
                repoint.append((a, q))
            words += _mlut_words(repoint, mask)
        else:
            for a in range(start, end + 1):
                alloc.refs[alloc.mlut[a]] -= 1
            new_start, new_end, fresh = alloc.append_range(new)
            words += [PlutWrite(q, alloc.plut[q], mask) for q in fresh]
            words += _mlut_words([(a, alloc.mlut[a]) for a in range(new_start, new_end + 1)], mask)
            alloc.glut[gid] = (new_start, new_end)
            words.append(GlutWrite(((gid, new_start, new_end),), mask))
    program.gates[gate] = new_gate
    return words


def load_gate_file(path) -> tuple[list[GateDefinition], list[str] | None]:
    """Read gate definitions (and optionally a circuit) from JSON or TOML."""
    data = _load_doc(path)
    unknown = set(data) - {"gates", "circuit"}
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {sorted(unknown)}")
    gates = [GateDefinition.from_dict(g) for g in data.get("gates", [])]
    return gates, data.get("circuit")


def load_circuit_file(path) -> list[str]:
    """A circuit is a JSON/TOML document with a `circuit` list, or whitespace-separated names."""
    p = Path(path)
    if p.suffix in (".json", ".toml"):
        data = _load_doc(p)
        if isinstance(data, list):
            return [str(x) for x in data]
        return [str(x) for x in data.get("circuit", [])]
    return p.read_text().split()


def _load_doc(path):
    p = Path(path)
    if p.suffix == ".toml":
        from ._toml import load_toml
        return load_toml(p)
    return json.loads(p.read_text())
