"""Closed-form streaming limits: gate times, word accounting and update budgets.

All times are returned in ns.  Word counts refer to 256-bit transfer words
moved at the DMA word clock.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError

_EPS = 1e-9


@dataclass(frozen=True)
class StreamConfig:
    w_bus: int = 32
    f_dma: float = 333e6
    n_ch: int = 8
    n_p: int = 8
    f_seq: float = 409.6e6
    pack_capacity: int = 20

    def __post_init__(self):
        if min(self.w_bus, self.f_dma, self.n_ch, self.n_p, self.f_seq, self.pack_capacity) <= 0:
            raise ConfigError("stream configuration values must be positive")
        if self.pack_capacity > 20:
            raise ConfigError("a sequencing word holds at most 20 gate IDs")


DEFAULT = StreamConfig()


def dma_bandwidth(cfg: StreamConfig = DEFAULT) -> float:
    """Bytes per second needed to move one bus word per DMA clock."""
    return cfg.w_bus * cfg.f_dma


def gate_time(words: float, f: float) -> float:
    return words / f * 1e9


def raw_gate_time(cfg: StreamConfig = DEFAULT) -> float:
    """Shortest continuously streamable gate when every parameter is sent raw."""
    return gate_time(cfg.n_ch * cfg.n_p, cfg.f_dma)


def words_per_gate(s: int, n_ch: int, p_upd: int) -> int:
    if min(s, n_ch, p_upd) < 0:
        raise ConfigError("word accounting inputs must be non-negative")
    return s * n_ch + p_upd


def initial_program_time(cfg: StreamConfig = DEFAULT, words_per_channel: int = 11) -> float:
    """Time to program and read out one gate on every channel from scratch."""
    return gate_time(cfg.n_ch * words_per_channel, cfg.f_dma)


def packed_words_per_gate(cfg: StreamConfig = DEFAULT, p_upd: int = 0,
                          overhead: int = 1) -> float:
    """Fractional words per gate when gate IDs share sequencing words.

    The sequencing cost is n_ch/pack_capacity; `overhead` adds a
    non-amortized word per gate.  With overhead=0 and p_upd=0 this is the
    steady-state sequencing cost alone.
    """
    if p_upd < 0 or overhead < 0:
        raise ConfigError("word accounting inputs must be non-negative")
    return cfg.n_ch / cfg.pack_capacity + p_upd + overhead


def compression_factor(cfg: StreamConfig = DEFAULT) -> float:
    """Raw words per gate over packed steady-state sequencing words per gate."""
    return (cfg.n_ch * cfg.n_p) / packed_words_per_gate(cfg, 0, 0)


def sequencing_bandwidth(cfg: StreamConfig = DEFAULT) -> float:
    return dma_bandwidth(cfg) / compression_factor(cfg)


def update_budget(cfg: StreamConfig = DEFAULT, gate_time_ns: float = 1000.0) -> int:
    """Parameters that fit between gates of the given length, after readout."""
    if gate_time_ns <= 0:
        raise ConfigError("gate time must be positive")
    return math.floor(cfg.f_dma * gate_time_ns * 1e-9 + _EPS) - cfg.n_p


def full_plut_update_gates(cfg: StreamConfig = DEFAULT, plut_total: int = 32768,
                           gate_time_ns: float = 1000.0, interleaved: bool = False) -> int:
    """Gates of `gate_time_ns` whose transfer slots cover a full PLUT rewrite.

    By default every word slot of a gate is counted.  With interleaved=True
    the per-gate readout words are subtracted first.
    """
    if gate_time_ns <= 0:
        raise ConfigError("gate time must be positive")
    if interleaved:
        budget = update_budget(cfg, gate_time_ns)
    else:
        budget = math.floor(cfg.f_dma * gate_time_ns * 1e-9 + _EPS)
    if budget <= 0:
        raise ConfigError("no transfer slots available per gate")
    return math.ceil(plut_total / budget)


def sequencer_floor(cfg: StreamConfig = DEFAULT) -> float:
    return gate_time(cfg.n_p, cfg.f_seq)


@dataclass(frozen=True)
class GpioDecomposition:
    t_rpu: float
    t_pl: float
    residual: float


def gpio_decompose(t_333: float, t_200: float, t_100: float,
                   clocks: tuple[float, float, float] = (333e6, 200e6, 100e6)) -> GpioDecomposition:
    """Split per-transfer handshake times into processor and PL shares.

    The PL share scales inversely with the PL clock, so
    t_f = t_rpu + (f_0/f) * t_pl.  The first two equations are solved
    exactly; the residual is the third equation's measured time minus the
    model prediction.
    """
    f0, f1, f2 = clocks
    s1, s2 = f0 / f1, f0 / f2
    if math.isclose(s1, 1.0):
        raise ConfigError("singular system: the first two clocks are equal")
    a = np.array([[1.0, 1.0], [1.0, s1]])
    t_rpu, t_pl = np.linalg.solve(a, np.array([t_333, t_200], dtype=float))
    residual = t_100 - (t_rpu + s2 * t_pl)
    return GpioDecomposition(float(t_rpu), float(t_pl), float(residual))


def single_param_update_time(payload: int = 32, preset: str = "zcu111/dma-256-mm2s",
                             rate: float | None = None, base_latency_ns: float = 0.0) -> float:
    """Time to push one small update through a DMA channel.

    With `rate` given the time is base_latency_ns + payload/rate; otherwise
    the slowest (stalled) trial of the preset is used.
    """
    if rate is not None:
        if math.isinf(rate):
            return base_latency_ns
        return base_latency_ns + payload / rate * 1e9
    from .channels import get_preset

    return get_preset(preset).worst_case_time(payload)


@dataclass(frozen=True)
class Row:
    name: str
    computed: float
    reference: float
    unit: str
    tolerance: float
    relative: bool = False
    note: str = ""
    decimals: int | None = None

    @property
    def deviation(self) -> float:
        return self.computed - self.reference

    @property
    def passed(self) -> bool:
        limit = self.tolerance * abs(self.reference) if self.relative else self.tolerance
        dev = self.deviation
        if self.decimals is not None:
            dev = round(self.computed, self.decimals) - self.reference
        return abs(dev) <= limit + 1e-9

    def as_dict(self) -> dict:
        d = asdict(self)
        d["deviation"] = self.deviation
        d["pass"] = self.passed
        return d


def reproduction_table(cfg: StreamConfig = DEFAULT) -> list[Row]:
    gp = gpio_decompose(95.6, 122.7, 193.2)
    packed8 = gate_time(packed_words_per_gate(cfg, 8), cfg.f_dma)
    packed1 = gate_time(packed_words_per_gate(cfg, 1), cfg.f_dma)
    note = "candidate accounting n_ch/20 + P_upd + 1; the reference implies a fractional word count"
    return [
        Row("dma_bandwidth", dma_bandwidth(cfg) / 1e9, 10.656, "GB/s", 0.0),
        Row("raw_gate_time", raw_gate_time(cfg), 192.2, "ns", 0.1),
        Row("initial_program_time", initial_program_time(cfg), 264.3, "ns", 0.1),
        Row("gate_time_p_upd_8", gate_time(words_per_gate(1, cfg.n_ch, 8), cfg.f_dma), 48.0, "ns", 0.0,
            note="compared at 0.1 ns resolution", decimals=1),
        Row("gate_time_p_upd_1", gate_time(words_per_gate(1, cfg.n_ch, 1), cfg.f_dma), 27.0, "ns", 0.0,
            note="compared at 0.1 ns resolution", decimals=1),
        Row("packed_gate_time_p_upd_8", packed8, 28.1, "ns", 0.02, True, note),
        Row("packed_gate_time_p_upd_1", packed1, 7.1, "ns", 0.02, True, note),
        Row("sequencer_floor", sequencer_floor(cfg), 19.5, "ns", 0.2),
        Row("update_budget_1us", update_budget(cfg, 1000.0), 325, "params", 0.0),
        Row("full_plut_update_gates", full_plut_update_gates(cfg), 99, "gates", 0.0),
        Row("compression_factor", compression_factor(cfg), 160, "x", 1e-9),
        Row("sequencing_bandwidth", sequencing_bandwidth(cfg) / 1e6, 66.6, "MB/s", 0.1),
        Row("single_param_update_time", single_param_update_time() / 1000, 1.82, "us", 0.01),
        Row("gpio_t_rpu", gp.t_rpu, 54.7, "ns", 1.5, note="exact solution of the two-clock system"),
        Row("gpio_t_pl333", gp.t_pl, 40.9, "ns", 1.5, note="exact solution of the two-clock system"),
        Row("gpio_residual_100mhz", gp.residual, 2.3, "ns", 0.5),
    ]


def table_json(rows: list[Row], config: dict | None = None) -> str:
    doc = {"rows": [r.as_dict() for r in rows]}
    if config is not None:
        doc["config"] = config
    return json.dumps(doc, indent=2, sort_keys=True)


def table_markdown(rows: list[Row]) -> str:
    lines = ["| quantity | computed | reference | unit | deviation | tolerance | pass |",
             "|---|---|---|---|---|---|---|"]
    for r in rows:
        tol = f"{r.tolerance:.0%}" if r.relative else f"{r.tolerance:g}"
        lines.append(f"| {r.name} | {r.computed:.4f} | {r.reference:g} | {r.unit} | "
                     f"{r.deviation:+.4f} | {tol} | {'yes' if r.passed else 'NO'} |")
    notes = [f"- {r.name}: {r.note}" for r in rows if r.note]
    if notes:
        lines += ["", *notes]
    return "\n".join(lines) + "\n"
