"""Bit-exact codec for the 256-bit words streamed into the gate sequencer.

Every word is a 256-bit unsigned integer, serialized as a 32-byte
little-endian record.  The top three bits carry the word type; the rest of
the layout depends on the variant::

    SEQUENCE  [0:220)   20 x 11-bit gate IDs
              [220:225) count
              [228:236) channel routing mask
    PLUT      [0:216)   spline segment payload
              [216:228) PLUT address
              [228:236) routing mask
    MLUT      [0:216)   up to 9 x (12-bit MLUT addr, 12-bit PLUT addr)
              [216:220) record count
              [228:236) routing mask
    GLUT      [0:210)   up to 6 x (11-bit gate ID, 12-bit start, 12-bit end)
              [216:220) record count
              [228:236) routing mask
    RAW       [0:216)   spline segment payload (LUT bypass)
              [228:236) routing mask
    all       [253:256) word type

Bits not listed are reserved: written as zero, ignored on decode.

The 216-bit spline segment is packed as::

    [0:40) U0  [40:80) U1  [80:120) U2  [120:160) U3  [160:200) tau  [200:216) M

with the U coefficients in 40-bit two's complement.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .errors import CapacityError, FieldRangeError, WordFormatError

WORD_BITS = 256
WORD_BYTES = WORD_BITS // 8
SEGMENT_BITS = 216
COEFF_BITS = 40
TAU_BITS = 40
META_BITS = 16
GATE_ID_BITS = 11
ADDR_BITS = 12
ROUTING_BITS = 8

MAX_GATE_IDS = 20
MAX_MLUT_RECORDS = 9
MAX_GLUT_RECORDS = 6

COEFF_MASK = (1 << COEFF_BITS) - 1
COEFF_MIN = -(1 << (COEFF_BITS - 1))
COEFF_MAX = (1 << (COEFF_BITS - 1)) - 1
SEGMENT_MASK = (1 << SEGMENT_BITS) - 1

_TYPE_SHIFT = 253
_ROUTING_SHIFT = 228
_COUNT_SHIFT_SEQ = 220
_COUNT_SHIFT_REC = 216
_PLUT_ADDR_SHIFT = 216
_MLUT_RECORD_BITS = 2 * ADDR_BITS
_GLUT_RECORD_BITS = GATE_ID_BITS + 2 * ADDR_BITS

# Metadata sub-fields of a spline segment.
META_KIND_MASK = 0x7
META_TONE = 1 << 3
FRAME_ACCUMULATE = 1 << 4
FRAME_FINAL_ONLY = 1 << 5
PHASE_SYNC = 1 << 6
FFWD_ENABLE = 1 << 7

KIND_FREQ, KIND_AMP, KIND_PHASE, KIND_FRAME = range(4)
PARAM_NAMES = ("freq0", "amp0", "phase0", "frame0",
               "freq1", "amp1", "phase1", "frame1")
NUM_PARAMS = len(PARAM_NAMES)


class WordType(enum.IntEnum):
    SEQUENCE = 1
    PLUT = 2
    MLUT = 3
    GLUT = 4
    RAW = 5


def _check_unsigned(field, value, bits):
    if not 0 <= value < (1 << bits):
        raise FieldRangeError(field, value, bits)


def _check_signed(field, value, bits):
    if not -(1 << (bits - 1)) <= value < (1 << (bits - 1)):
        raise FieldRangeError(field, value, bits)


def to_signed(value: int, bits: int = COEFF_BITS) -> int:
    """Interpret the low `bits` of `value` as two's complement."""
    value &= (1 << bits) - 1
    if value >> (bits - 1):
        value -= 1 << bits
    return value


def make_metadata(param: int, *, frame_accumulate=False, frame_final_only=False,
                  phase_sync=False, ffwd_enable=False) -> int:
    """Build segment metadata routing to engine `param` (0..7)."""
    if not 0 <= param < NUM_PARAMS:
        raise FieldRangeError("param", param, detail="engine index 0..7")
    meta = (param & 0x3) | (META_TONE if param >= 4 else 0)
    if frame_accumulate:
        meta |= FRAME_ACCUMULATE
    if frame_final_only:
        meta |= FRAME_FINAL_ONLY
    if phase_sync:
        meta |= PHASE_SYNC
    if ffwd_enable:
        meta |= FFWD_ENABLE
    return meta


@dataclass(frozen=True, slots=True)
class SplineSegment:
    """One PLUT entry: a cubic segment of one waveform parameter.

    ``u0..u3`` are the value and first three forward differences at the
    segment start; ``tau`` is the number of samples the segment lasts.
    """

    metadata: int = 0
    tau: int = 1
    u3: int = 0
    u2: int = 0
    u1: int = 0
    u0: int = 0

    def __post_init__(self):
        if not (0 <= self.metadata <= 0xFFFF and 1 <= self.tau <= COEFF_MASK
                and COEFF_MIN <= self.u3 <= COEFF_MAX and COEFF_MIN <= self.u2 <= COEFF_MAX
                and COEFF_MIN <= self.u1 <= COEFF_MAX and COEFF_MIN <= self.u0 <= COEFF_MAX):
            self._raise_range()

    def _raise_range(self):
        _check_unsigned("metadata", self.metadata, META_BITS)
        _check_unsigned("tau", self.tau, TAU_BITS)
        if self.tau < 1:
            raise FieldRangeError("tau", self.tau, detail="must be >= 1")
        for name in ("u3", "u2", "u1", "u0"):
            _check_signed(name, getattr(self, name), COEFF_BITS)

    @property
    def kind(self) -> int:
        return self.metadata & META_KIND_MASK

    @property
    def tone(self) -> int:
        return 1 if self.metadata & META_TONE else 0

    @property
    def engine_index(self) -> int:
        """Index of the spline engine this segment feeds, or raise."""
        kind = self.kind
        if kind > KIND_FRAME:
            raise WordFormatError(f"segment routing tag {kind} names no parameter")
        return self.tone * 4 + kind

    @property
    def coefficients(self) -> tuple[int, int, int, int]:
        return (self.u0, self.u1, self.u2, self.u3)


def encode_segment(seg: SplineSegment) -> int:
    """Pack a segment into bits [0, 216) of an otherwise zero 256-bit block."""
    return ((seg.u0 & COEFF_MASK)
            | (seg.u1 & COEFF_MASK) << 40
            | (seg.u2 & COEFF_MASK) << 80
            | (seg.u3 & COEFF_MASK) << 120
            | seg.tau << 160
            | seg.metadata << 200)


def decode_segment(block: int) -> SplineSegment:
    """Inverse of :func:`encode_segment`; bits above 216 are ignored."""
    tau = (block >> 160) & COEFF_MASK
    if tau == 0:
        raise WordFormatError("segment duration tau is zero")
    # xor/subtract sign extension, inlined for speed
    sign = 1 << (COEFF_BITS - 1)
    return SplineSegment(
        (block >> 200) & 0xFFFF,
        tau,
        (((block >> 120) & COEFF_MASK) ^ sign) - sign,
        (((block >> 80) & COEFF_MASK) ^ sign) - sign,
        (((block >> 40) & COEFF_MASK) ^ sign) - sign,
        ((block & COEFF_MASK) ^ sign) - sign,
    )


@dataclass(frozen=True, slots=True)
class GateSequenceWord:
    """Up to 20 packed gate IDs for readout on the channels in `routing`."""

    gate_ids: tuple[int, ...]
    routing: int = 1

    def __post_init__(self):
        if len(self.gate_ids) > MAX_GATE_IDS:
            raise CapacityError("sequence word", len(self.gate_ids), MAX_GATE_IDS)
        if self.gate_ids and not 0 <= min(self.gate_ids) <= max(self.gate_ids) <= 0x7FF:
            bad = next(g for g in self.gate_ids if not 0 <= g <= 0x7FF)
            raise FieldRangeError("gate_id", bad, GATE_ID_BITS)
        _check_unsigned("routing", self.routing, ROUTING_BITS)

    @property
    def count(self) -> int:
        return len(self.gate_ids)


class ProgrammingWord:
    """Marker base for words that write LUT contents."""

    __slots__ = ()
    target: str


@dataclass(frozen=True, slots=True)
class PlutWrite(ProgrammingWord):
    address: int
    segment: SplineSegment
    routing: int = 1
    target = "PLUT"

    def __post_init__(self):
        _check_unsigned("plut_address", self.address, ADDR_BITS)
        _check_unsigned("routing", self.routing, ROUTING_BITS)


@dataclass(frozen=True, slots=True)
class MlutWrite(ProgrammingWord):
    """Packed (MLUT address -> PLUT address) assignments."""

    entries: tuple[tuple[int, int], ...]
    routing: int = 1
    target = "MLUT"

    def __post_init__(self):
        if not 1 <= len(self.entries) <= MAX_MLUT_RECORDS:
            raise CapacityError("MLUT word", len(self.entries), MAX_MLUT_RECORDS)
        for mlut_addr, plut_addr in self.entries:
            if not (0 <= mlut_addr <= 0xFFF and 0 <= plut_addr <= 0xFFF):
                _check_unsigned("mlut_address", mlut_addr, ADDR_BITS)
                _check_unsigned("plut_address", plut_addr, ADDR_BITS)
        _check_unsigned("routing", self.routing, ROUTING_BITS)


@dataclass(frozen=True, slots=True)
class GlutWrite(ProgrammingWord):
    """Packed (gate ID -> MLUT start, MLUT end) records."""

    records: tuple[tuple[int, int, int], ...]
    routing: int = 1
    target = "GLUT"

    def __post_init__(self):
        if not 1 <= len(self.records) <= MAX_GLUT_RECORDS:
            raise CapacityError("GLUT word", len(self.records), MAX_GLUT_RECORDS)
        for gid, start, end in self.records:
            if not (0 <= gid <= 0x7FF and 0 <= start <= 0xFFF and 0 <= end <= 0xFFF):
                _check_unsigned("gate_id", gid, GATE_ID_BITS)
                _check_unsigned("mlut_start", start, ADDR_BITS)
                _check_unsigned("mlut_end", end, ADDR_BITS)
        _check_unsigned("routing", self.routing, ROUTING_BITS)


@dataclass(frozen=True, slots=True)
class RawSegmentWord:
    """A segment streamed straight to the spline engine FIFOs."""

    segment: SplineSegment
    routing: int = 1

    def __post_init__(self):
        _check_unsigned("routing", self.routing, ROUTING_BITS)


Word = Union[GateSequenceWord, PlutWrite, MlutWrite, GlutWrite, RawSegmentWord]


def pack_gate_ids(ids: Iterable[int], routing: int = 1) -> GateSequenceWord:
    ids = tuple(ids)
    if not ids:
        raise CapacityError("sequence word (minimum 1 ID)", 0, MAX_GATE_IDS)
    return GateSequenceWord(ids, routing)


def encode_word(word: Word) -> int:
    """Encode any word variant into its 256-bit integer form."""
    if isinstance(word, GateSequenceWord):
        block = 0
        for slot, gid in enumerate(word.gate_ids):
            block |= gid << (slot * GATE_ID_BITS)
        block |= len(word.gate_ids) << _COUNT_SHIFT_SEQ
        wtype = WordType.SEQUENCE
    elif isinstance(word, PlutWrite):
        block = encode_segment(word.segment) | word.address << _PLUT_ADDR_SHIFT
        wtype = WordType.PLUT
    elif isinstance(word, MlutWrite):
        block = 0
        for slot, (mlut_addr, plut_addr) in enumerate(word.entries):
            block |= (mlut_addr | plut_addr << ADDR_BITS) << (slot * _MLUT_RECORD_BITS)
        block |= len(word.entries) << _COUNT_SHIFT_REC
        wtype = WordType.MLUT
    elif isinstance(word, GlutWrite):
        block = 0
        for slot, (gid, start, end) in enumerate(word.records):
            rec = gid | start << GATE_ID_BITS | end << (GATE_ID_BITS + ADDR_BITS)
            block |= rec << (slot * _GLUT_RECORD_BITS)
        block |= len(word.records) << _COUNT_SHIFT_REC
        wtype = WordType.GLUT
    elif isinstance(word, RawSegmentWord):
        block = encode_segment(word.segment)
        wtype = WordType.RAW
    else:
        raise TypeError(f"not a word: {word!r}")
    return block | word.routing << _ROUTING_SHIFT | int(wtype) << _TYPE_SHIFT


def word_type(block: int) -> WordType:
    code = (block >> _TYPE_SHIFT) & 0x7
    try:
        return WordType(code)
    except ValueError:
        raise WordFormatError(f"unknown word type bits {code:03b}") from None


def decode_word(block: int) -> Word:
    """Decode a 256-bit block into the variant named by its type bits."""
    if not 0 <= block < (1 << WORD_BITS):
        raise WordFormatError("block does not fit in 256 bits")
    wtype = word_type(block)
    routing = (block >> _ROUTING_SHIFT) & 0xFF
    if wtype is WordType.SEQUENCE:
        count = (block >> _COUNT_SHIFT_SEQ) & 0x1F
        if count > MAX_GATE_IDS:
            raise WordFormatError(f"sequence word count {count} > {MAX_GATE_IDS}")
        ids = tuple((block >> (slot * GATE_ID_BITS)) & 0x7FF for slot in range(count))
        return GateSequenceWord(ids, routing)
    if wtype is WordType.PLUT:
        address = (block >> _PLUT_ADDR_SHIFT) & 0xFFF
        return PlutWrite(address, decode_segment(block), routing)
    if wtype is WordType.RAW:
        return RawSegmentWord(decode_segment(block), routing)
    count = (block >> _COUNT_SHIFT_REC) & 0xF
    if wtype is WordType.MLUT:
        if not 1 <= count <= MAX_MLUT_RECORDS:
            raise WordFormatError(f"MLUT word record count {count}")
        entries = []
        for slot in range(count):
            rec = block >> (slot * _MLUT_RECORD_BITS)
            entries.append((rec & 0xFFF, (rec >> ADDR_BITS) & 0xFFF))
        return MlutWrite(tuple(entries), routing)
    if not 1 <= count <= MAX_GLUT_RECORDS:
        raise WordFormatError(f"GLUT word record count {count}")
    records = []
    for slot in range(count):
        rec = block >> (slot * _GLUT_RECORD_BITS)
        records.append((rec & 0x7FF, (rec >> GATE_ID_BITS) & 0xFFF,
                        (rec >> (GATE_ID_BITS + ADDR_BITS)) & 0xFFF))
    return GlutWrite(tuple(records), routing)


def word_to_bytes(block: int) -> bytes:
    return block.to_bytes(WORD_BYTES, "little")


def word_from_bytes(record: bytes) -> int:
    if len(record) != WORD_BYTES:
        raise WordFormatError(f"record is {len(record)} bytes, expected {WORD_BYTES}")
    return int.from_bytes(record, "little")


def stream_to_bytes(words: Iterable[Word | int]) -> bytes:
    return b"".join(word_to_bytes(w if isinstance(w, int) else encode_word(w))
                    for w in words)


def stream_from_bytes(data: bytes) -> list[int]:
    if len(data) % WORD_BYTES:
        raise WordFormatError(
            f"stream length {len(data)} is not a multiple of {WORD_BYTES}")
    return [int.from_bytes(data[i:i + WORD_BYTES], "little")
            for i in range(0, len(data), WORD_BYTES)]


def write_stream(path, words: Iterable[Word | int]) -> int:
    """Write words as 32-byte little-endian records; returns the word count."""
    data = stream_to_bytes(words)
    Path(path).write_bytes(data)
    return len(data) // WORD_BYTES


def read_stream(path) -> list[int]:
    return stream_from_bytes(Path(path).read_bytes())
