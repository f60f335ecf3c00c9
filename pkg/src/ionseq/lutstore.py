"""Three-level gate sequencer memory: GLUT -> MLUT -> PLUT, one set per channel."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import FieldRangeError, GateLookupError
from .wordcodec import (
    GateSequenceWord,
    GlutWrite,
    MlutWrite,
    PlutWrite,
    ProgrammingWord,
    RawSegmentWord,
    SplineSegment,
    decode_segment,
    decode_word,
    encode_segment,
)

GLUT_DEPTH = 1 << 11
MLUT_DEPTH = 1 << 12
PLUT_DEPTH = 1 << 12
NUM_CHANNELS = 8


@dataclass
class ReadoutIterator:
    """Steps an MLUT address from a gate's start to its end, inclusive."""

    luts: "LutSet"
    current: int
    end: int
    channel: int = 0

    def __iter__(self) -> Iterator[SplineSegment]:
        while self.current <= self.end:
            addr = self.current
            plut_addr = self.luts.mlut[addr]
            if plut_addr is None:
                raise GateLookupError(f"channel {self.channel}: MLUT[{addr}] unprogrammed")
            seg = self.luts.plut[plut_addr]
            if seg is None:
                raise GateLookupError(
                    f"channel {self.channel}: PLUT[{plut_addr}] unprogrammed (via MLUT[{addr}])")
            self.current += 1
            yield seg

    def __len__(self):
        return max(0, self.end - self.current + 1)


class LutSet:
    """GLUT/MLUT/PLUT contents of one output channel.

    Unprogrammed entries hold ``None`` and reading them is an error.
    """

    def __init__(self, channel: int = 0):
        self.channel = channel
        self.glut: list[tuple[int, int] | None] = [None] * GLUT_DEPTH
        self.mlut: list[int | None] = [None] * MLUT_DEPTH
        self.plut: list[SplineSegment | None] = [None] * PLUT_DEPTH

    def program(self, word: ProgrammingWord) -> None:
        if isinstance(word, PlutWrite):
            self.plut[word.address] = word.segment
        elif isinstance(word, MlutWrite):
            for mlut_addr, plut_addr in word.entries:
                self.mlut[mlut_addr] = plut_addr
        elif isinstance(word, GlutWrite):
            for gid, start, end in word.records:
                if start > end:
                    raise FieldRangeError("mlut_end", end, detail=f"gate {gid} start {start} > end")
            for gid, start, end in word.records:
                self.glut[gid] = (start, end)
        else:
            raise TypeError(f"not a programming word: {word!r}")

    def iter_gate(self, gate_id: int) -> ReadoutIterator:
        if not 0 <= gate_id < GLUT_DEPTH:
            raise FieldRangeError("gate_id", gate_id, 11)
        entry = self.glut[gate_id]
        if entry is None:
            raise GateLookupError(f"channel {self.channel}: gate {gate_id} not programmed")
        return ReadoutIterator(self, entry[0], entry[1], self.channel)

    def read_gate(self, gate_id: int) -> list[SplineSegment]:
        return list(self.iter_gate(gate_id))

    def to_dict(self) -> dict:
        return {
            "glut": {str(i): list(e) for i, e in enumerate(self.glut) if e is not None},
            "mlut": {str(i): e for i, e in enumerate(self.mlut) if e is not None},
            "plut": {str(i): f"{encode_segment(e):054x}"
                     for i, e in enumerate(self.plut) if e is not None},
        }

    @classmethod
    def from_dict(cls, data: dict, channel: int = 0) -> "LutSet":
        luts = cls(channel)
        for k, (start, end) in data.get("glut", {}).items():
            luts.glut[int(k)] = (start, end)
        for k, v in data.get("mlut", {}).items():
            luts.mlut[int(k)] = v
        for k, v in data.get("plut", {}).items():
            luts.plut[int(k)] = decode_segment(int(v, 16))
        return luts


Routed = tuple[int, int, SplineSegment]


class LutStore:
    """LUT sets for all channels plus the word-level ingest path."""

    def __init__(self, num_channels: int = NUM_CHANNELS):
        if not 1 <= num_channels <= NUM_CHANNELS:
            raise FieldRangeError("num_channels", num_channels, detail="1..8")
        self.channels = [LutSet(ch) for ch in range(num_channels)]

    def __getitem__(self, channel: int) -> LutSet:
        return self.channels[channel]

    def _targets(self, routing: int) -> list[int]:
        if routing >> len(self.channels):
            raise FieldRangeError("routing", routing,
                                  detail=f"only {len(self.channels)} channels present")
        return [ch for ch in range(len(self.channels)) if routing >> ch & 1]

    def program(self, word: ProgrammingWord, channel: int) -> None:
        self.channels[channel].program(word)

    def read_gate(self, gate_id: int, channel: int) -> list[SplineSegment]:
        return self.channels[channel].read_gate(gate_id)

    def process_word(self, block: int) -> list[Routed]:
        """Ingest one 256-bit word.

        Programming words update the LUTs of every routed channel and
        return nothing.  Sequencing words expand each gate ID through
        GLUT -> MLUT -> PLUT and return ``(channel, engine, segment)``
        triples in readout order; raw words pass their segment through.
        """
        word = decode_word(block)
        targets = self._targets(word.routing)
        if isinstance(word, ProgrammingWord):
            for ch in targets:
                self.channels[ch].program(word)
            return []
        if isinstance(word, RawSegmentWord):
            engine = word.segment.engine_index
            return [(ch, engine, word.segment) for ch in targets]
        assert isinstance(word, GateSequenceWord)
        routed: list[Routed] = []
        for ch in targets:
            luts = self.channels[ch]
            for gid in word.gate_ids:
                for seg in luts.iter_gate(gid):
                    routed.append((ch, seg.engine_index, seg))
        return routed

    def process_stream(self, blocks) -> list[Routed]:
        out: list[Routed] = []
        for block in blocks:
            out.extend(self.process_word(block))
        return out

    def to_json(self) -> str:
        return json.dumps({"channels": [luts.to_dict() for luts in self.channels]},
                          indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LutStore":
        data = json.loads(text)
        store = cls(len(data["channels"]))
        store.channels = [LutSet.from_dict(d, ch) for ch, d in enumerate(data["channels"])]
        return store

    def dump(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "LutStore":
        return cls.from_json(Path(path).read_text())
