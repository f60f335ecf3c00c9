"""Gate sequencer toolkit: word codec, LUT store, spline engines, DDS, compiler and channel models."""

__version__ = "0.1.0"

from .compiler import GateDefinition, compile_program, delta_update, emit_raw_stream
from .sequencer import Simulator, simulate
from .wordcodec import decode_word, encode_word

__all__ = [
    "GateDefinition",
    "Simulator",
    "compile_program",
    "decode_word",
    "delta_update",
    "emit_raw_stream",
    "encode_word",
    "simulate",
]
