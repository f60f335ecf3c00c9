import pytest
from hypothesis import settings, strategies as st

from ionseq.wordcodec import (
    COEFF_MAX,
    COEFF_MIN,
    GateSequenceWord,
    GlutWrite,
    MlutWrite,
    PlutWrite,
    RawSegmentWord,
    SplineSegment,
)

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")

coeff = st.integers(COEFF_MIN, COEFF_MAX)
routing = st.integers(0, 255)
addr12 = st.integers(0, 4095)
gid = st.integers(0, 2047)
# metadata whose routing tag names a real parameter (kind 0..3)
routable_meta = st.integers(0, 0xFFFF).map(lambda m: m & ~0x4)


@st.composite
def segments(draw, metadata=st.integers(0, 0xFFFF), tau=st.integers(1, (1 << 40) - 1)):
    return SplineSegment(draw(metadata), draw(tau), draw(coeff), draw(coeff), draw(coeff), draw(coeff))


sequence_words = st.builds(GateSequenceWord, st.lists(gid, min_size=1, max_size=20).map(tuple), routing)
plut_words = st.builds(PlutWrite, addr12, segments(), routing)
mlut_words = st.builds(MlutWrite, st.lists(st.tuples(addr12, addr12), min_size=1, max_size=9).map(tuple), routing)
glut_words = st.builds(
    GlutWrite,
    st.lists(st.tuples(gid, addr12, addr12).map(lambda r: (r[0], min(r[1:]), max(r[1:]))),
             min_size=1, max_size=6).map(tuple),
    routing,
)
raw_words = st.builds(RawSegmentWord, segments(), routing)
any_word = st.one_of(sequence_words, plut_words, mlut_words, glut_words, raw_words)


@pytest.fixture
def const_gate():
    """One gate, one channel, a distinct constant on each of the 8 parameters."""
    from ionseq.compiler import GateDefinition

    params = {name: 100 * (i + 1) for i, name in enumerate(
        ("freq0", "amp0", "phase0", "frame0", "freq1", "amp1", "phase1", "frame1"))}
    return GateDefinition("g", 50, {0: params})


# pass/fail lines recorded by the acceptance suite, echoed at session end
ACCEPTANCE_LOG: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
