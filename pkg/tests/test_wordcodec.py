import random

import pytest
from hypothesis import given, strategies as st

from conftest import any_word, segments, sequence_words
from ionseq.errors import CapacityError, FieldRangeError, WordFormatError
from ionseq.wordcodec import (
    FRAME_ACCUMULATE,
    META_TONE,
    GateSequenceWord,
    GlutWrite,
    MlutWrite,
    PlutWrite,
    RawSegmentWord,
    SplineSegment,
    WordType,
    decode_segment,
    decode_word,
    encode_segment,
    encode_word,
    make_metadata,
    pack_gate_ids,
    read_stream,
    stream_from_bytes,
    stream_to_bytes,
    word_from_bytes,
    word_to_bytes,
    write_stream,
)


def bits_oracle(fields):
    """Assemble a word from (offset, width, value) triples via a bit list."""
    bits = [0] * 256
    for offset, width, value in fields:
        value &= (1 << width) - 1
        for i in range(width):
            assert bits[offset + i] == 0, "overlapping fields"
            bits[offset + i] = (value >> i) & 1
    return sum(b << i for i, b in enumerate(bits))


def segment_fields(seg):
    return [(0, 40, seg.u0), (40, 40, seg.u1), (80, 40, seg.u2), (120, 40, seg.u3),
            (160, 40, seg.tau), (200, 16, seg.metadata)]


def test_zero_segment_has_only_tau():
    block = encode_segment(SplineSegment(0, 1, 0, 0, 0, 0))
    assert block == 1 << 160


def test_negative_u0_is_forty_ones():
    block = encode_segment(SplineSegment(0, 1, 0, 0, 0, -1))
    assert block & ((1 << 40) - 1) == (1 << 40) - 1
    assert block >> 40 == 1 << 120


def test_segment_fits_216_bits():
    seg = SplineSegment(0xFFFF, (1 << 40) - 1, -1, -1, -1, -1)
    assert encode_segment(seg) == (1 << 216) - 1


@given(segments())
def test_segment_layout_matches_oracle(seg):
    assert encode_segment(seg) == bits_oracle(segment_fields(seg))
    assert decode_segment(encode_segment(seg)) == seg


@pytest.mark.parametrize("field,kwargs", [
    ("tau", dict(tau=0)),
    ("tau", dict(tau=1 << 40)),
    ("metadata", dict(metadata=1 << 16)),
    ("u0", dict(u0=1 << 39)),
    ("u3", dict(u3=-(1 << 39) - 1)),
])
def test_segment_range_errors_name_field(field, kwargs):
    base = dict(metadata=0, tau=1, u3=0, u2=0, u1=0, u0=0)
    base.update(kwargs)
    with pytest.raises(FieldRangeError) as exc:
        SplineSegment(**base)
    assert exc.value.field == field


def test_decode_segment_rejects_zero_tau():
    with pytest.raises(WordFormatError):
        decode_segment(0)


def test_pack_single_id():
    w = pack_gate_ids([5])
    block = encode_word(w)
    assert block & ((1 << 220) - 1) == 5
    assert (block >> 220) & 0x1F == 1
    assert decode_word(block).gate_ids == (5,)


def test_pack_twenty_ids_round_trip():
    ids = list(range(100, 120))
    assert decode_word(encode_word(pack_gate_ids(ids))).gate_ids == tuple(ids)


def test_pack_capacity_errors():
    with pytest.raises(CapacityError):
        pack_gate_ids(range(21))
    with pytest.raises(CapacityError):
        pack_gate_ids([])
    with pytest.raises(FieldRangeError):
        pack_gate_ids([2048])


def test_sequence_budget_is_256_bits():
    assert 20 * 11 + 36 == 256


def test_decode_examples():
    w = decode_word(encode_word(pack_gate_ids([7, 9])))
    assert isinstance(w, GateSequenceWord) and w.gate_ids == (7, 9)
    seg = SplineSegment(3, 10, 1, 2, 3, 4)
    p = decode_word(encode_word(PlutWrite(3, seg)))
    assert isinstance(p, PlutWrite) and p.address == 3 and p.segment == seg


@pytest.mark.parametrize("code", [0, 6, 7])
def test_invalid_type_bits(code):
    rng = random.Random(code)
    for _ in range(50):
        block = rng.getrandbits(253) | code << 253
        with pytest.raises(WordFormatError):
            decode_word(block)


def test_record_words_need_one_record():
    with pytest.raises(CapacityError):
        MlutWrite(())
    with pytest.raises(CapacityError):
        GlutWrite(((0, 0, 0),) * 7)
    with pytest.raises(WordFormatError):
        decode_word(int(WordType.MLUT) << 253)


@given(any_word)
def test_round_trip_any_word(word):
    block = encode_word(word)
    assert 0 <= block < 1 << 256
    assert decode_word(block) == word


@given(sequence_words, st.integers(0, 255))
def test_sequence_layout_matches_oracle(word, _):
    fields = [(11 * i, 11, g) for i, g in enumerate(word.gate_ids)]
    fields += [(220, 5, word.count), (228, 8, word.routing), (253, 3, 1)]
    assert encode_word(word) == bits_oracle(fields)


@given(any_word, st.data())
def test_reserved_bits_ignored(word, data):
    block = encode_word(word)
    if isinstance(word, GateSequenceWord):
        reserved = [*range(11 * word.count, 220), *range(225, 228), *range(236, 253)]
    elif isinstance(word, MlutWrite):
        reserved = [*range(24 * len(word.entries), 216), *range(220, 228), *range(236, 253)]
    elif isinstance(word, GlutWrite):
        reserved = [*range(35 * len(word.records), 216), *range(220, 228), *range(236, 253)]
    elif isinstance(word, PlutWrite):
        reserved = list(range(236, 253))
    else:
        reserved = [*range(216, 228), *range(236, 253)]
    bit = data.draw(st.sampled_from(reserved))
    assert decode_word(block ^ (1 << bit)) == word


def test_metadata_fields():
    m = make_metadata(5, frame_accumulate=True)
    assert m & 0x7 == 1 and m & META_TONE and m & FRAME_ACCUMULATE
    seg = SplineSegment(m, 1, 0, 0, 0, 0)
    assert (seg.kind, seg.tone, seg.engine_index) == (1, 1, 5)
    with pytest.raises(FieldRangeError):
        make_metadata(8)


def test_bytes_little_endian(tmp_path):
    block = encode_word(RawSegmentWord(SplineSegment(0, 1, 0, 0, 0, 0x0102)))
    rec = word_to_bytes(block)
    assert len(rec) == 32 and rec[0] == 0x02 and rec[1] == 0x01
    assert word_from_bytes(rec) == block
    with pytest.raises(WordFormatError):
        word_from_bytes(rec[:31])
    with pytest.raises(WordFormatError):
        stream_from_bytes(b"\0" * 33)
    words = [pack_gate_ids([1, 2]), PlutWrite(0, SplineSegment(0, 4, 0, 0, 0, 1))]
    assert stream_from_bytes(stream_to_bytes(words)) == [encode_word(w) for w in words]
    path = tmp_path / "s.bin"
    assert write_stream(path, words) == 2
    assert path.stat().st_size == 64
    assert [decode_word(b) for b in read_stream(path)] == words
