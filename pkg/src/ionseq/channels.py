"""Timing models for the on-chip communication channels.

A channel is modelled as a fixed start-up latency plus a per-bus-word cost,
with optional periodic stalls (refresh-like dips) and bounded jitter.  The
presets in ``presets.toml`` pin these parameters to measured anchor values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from ._toml import loads_toml
from .errors import ConfigError


def gpio_latency(counter: float, f_clk: float) -> float:
    """One-way handshake latency in ns from a round-trip PL counter value."""
    if f_clk <= 0:
        raise ConfigError(f"clock frequency must be positive, got {f_clk}")
    if counter <= 0:
        raise ConfigError(f"counter must be positive, got {counter}")
    return counter / (2.0 * f_clk) * 1e9


def gpio_throughput(n_bytes: float, iterations: float, handshakes: float,
                    f_clk: float, counter: float) -> float:
    """Handshake throughput in B/s: bytes * iterations * handshakes * f_clk / counter."""
    return n_bytes * iterations * handshakes * f_clk / counter


@dataclass(frozen=True)
class TrialStats:
    median: float
    min: float
    max: float
    count: int

    @classmethod
    def from_samples(cls, samples) -> "TrialStats":
        a = np.asarray(samples, dtype=float)
        return cls(float(np.median(a)), float(a.min()), float(a.max()), int(a.size))

    def as_dict(self) -> dict:
        return {"median": self.median, "min": self.min, "max": self.max, "count": self.count}


@dataclass(frozen=True)
class ChannelTimingModel:
    name: str
    base_latency_ns: float
    bus_width: int
    clock_hz: float
    word_cost: float = 1.0
    stall_period: int = 0
    stall_magnitude: float = 0.0
    stall_ns: float = 0.0
    jitter: str = "none"
    jitter_ns: float = 0.0
    direction: str = ""
    kind: str = ""
    anchors: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.clock_hz <= 0 or self.bus_width <= 0 or self.word_cost <= 0:
            raise ConfigError(f"{self.name}: clock, bus width and word cost must be positive")
        if self.base_latency_ns < 0 or self.stall_ns < 0 or self.jitter_ns < 0:
            raise ConfigError(f"{self.name}: times must be non-negative")
        if not 0.0 <= self.stall_magnitude < 1.0:
            raise ConfigError(f"{self.name}: stall magnitude must lie in [0, 1)")
        if self.jitter not in ("none", "uniform"):
            raise ConfigError(f"{self.name}: unknown jitter model {self.jitter!r}")

    @property
    def bandwidth(self) -> float:
        """Asymptotic throughput in B/s."""
        return self.bus_width * self.clock_hz / self.word_cost

    @property
    def word_time_ns(self) -> float:
        return self.word_cost / self.clock_hz * 1e9

    def transfer_time(self, payload: int) -> float:
        """Nominal (unstalled, jitter-free) transfer time in ns."""
        if payload < 1:
            raise ConfigError(f"payload must be >= 1 byte, got {payload}")
        return self.base_latency_ns + math.ceil(payload / self.bus_width) * self.word_time_ns

    def stalled_time(self, payload: int) -> float:
        return self.transfer_time(payload) / (1.0 - self.stall_magnitude) + self.stall_ns

    def worst_case_time(self, payload: int) -> float:
        if self.stall_period > 0:
            return self.stalled_time(payload)
        return self.transfer_time(payload)

    def throughput(self, payload: int) -> float:
        return payload / self.transfer_time(payload) * 1e9

    def is_stalled(self, index: int) -> bool:
        return self.stall_period > 0 and index % self.stall_period == self.stall_period - 1

    def trial_time(self, payload: int, index: int, rng: np.random.Generator) -> float:
        t = self.stalled_time(payload) if self.is_stalled(index) else self.transfer_time(payload)
        if self.jitter == "uniform" and self.jitter_ns > 0:
            t += rng.uniform(0.0, self.jitter_ns)
        return t


@dataclass(frozen=True)
class RmsgModel:
    """Interprocessor message timing interpolated between measured anchors.

    `anchors` maps a direction (``apu2rpu``/``rpu2apu``) to ascending
    ``(payload, ns)`` points.  Times are capped below by the maximum rate.
    """

    name: str
    max_rate: float
    anchors: dict

    def transfer_time(self, direction: str, payload: int) -> float:
        try:
            pts = self.anchors[direction]
        except KeyError:
            raise ConfigError(f"unknown Rmsg direction {direction!r}") from None
        xs = [p for p, _ in pts]
        ys = [t for _, t in pts]
        if not xs[0] <= payload <= xs[-1]:
            warnings.warn(f"Rmsg payload {payload} B outside measured range "
                          f"{xs[0]}..{xs[-1]} B; extrapolating", stacklevel=2)
        if payload < xs[0]:
            i = 0
        elif payload > xs[-1]:
            i = len(xs) - 2
        else:
            i = max(0, int(np.searchsorted(xs, payload)) - 1)
            i = min(i, len(xs) - 2)
        slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
        t = ys[i] + slope * (payload - xs[i])
        return max(t, payload / self.max_rate * 1e9)

    def channel(self, direction: str) -> "RmsgChannel":
        return RmsgChannel(f"{self.name}-{direction}", self, direction)


@dataclass(frozen=True)
class RmsgChannel:
    name: str
    model: RmsgModel
    direction: str
    kind: str = "rmsg"

    @property
    def bandwidth(self) -> float:
        return self.model.max_rate

    def transfer_time(self, payload: int) -> float:
        return self.model.transfer_time(self.direction, payload)

    def worst_case_time(self, payload: int) -> float:
        return self.transfer_time(payload)

    def throughput(self, payload: int) -> float:
        return payload / self.transfer_time(payload) * 1e9

    def trial_time(self, payload, index, rng) -> float:
        return self.transfer_time(payload)


@dataclass(frozen=True)
class GpioPreset:
    """Handshake counter values measured at several PL clocks."""

    name: str
    bytes_per_handshake: int
    iterations: int
    handshakes: int
    points: tuple[tuple[float, int, int], ...]

    def point(self, f_clk: float) -> tuple[float, int, int]:
        for p in self.points:
            if math.isclose(p[0], f_clk, rel_tol=1e-9):
                return p
        raise ConfigError(f"{self.name}: no measurement at {f_clk / 1e6:g} MHz")

    def latency(self, f_clk: float) -> float:
        _, n_lat, _ = self.point(f_clk)
        return gpio_latency(n_lat, f_clk)

    def throughput(self, f_clk: float) -> float:
        _, _, n_tput = self.point(f_clk)
        return gpio_throughput(self.bytes_per_handshake, self.iterations, self.handshakes,
                               f_clk, n_tput)

    def transfer_time(self, f_clk: float) -> float:
        """Time per handshake transfer in ns, from the throughput counter."""
        return self.bytes_per_handshake / self.throughput(f_clk) * 1e9

    def channel(self, f_clk: float) -> ChannelTimingModel:
        f, n_lat, n_tput = self.point(f_clk)
        return ChannelTimingModel(
            name=f"{self.name}-{round(f / 1e6)}",
            base_latency_ns=gpio_latency(n_lat, f),
            bus_width=self.bytes_per_handshake,
            clock_hz=f,
            word_cost=n_tput / (self.iterations * self.handshakes),
            kind="gpio",
            direction="rpu2pl",
        )


_CHANNEL_KEYS = {
    "kind", "direction", "clock_hz", "bus_width", "base_latency_ns", "anchor_payload",
    "anchor_throughput", "anchor_min_payload", "anchor_min_throughput", "stall_period",
    "stall_ns", "stall_magnitude", "stall_fraction", "jitter", "jitter_ns", "steady_state",
}


def channel_from_anchors(name: str, spec: dict) -> ChannelTimingModel:
    """Build a model whose nominal and stalled times hit the preset anchors."""
    unknown = set(spec) - _CHANNEL_KEYS
    if unknown:
        raise ConfigError(f"{name}: unknown preset keys {sorted(unknown)}")
    bus = int(spec["bus_width"])
    clock = float(spec["clock_hz"])
    base = float(spec.get("base_latency_ns", 0.0))
    payload = int(spec["anchor_payload"])
    tput = float(spec["anchor_throughput"])
    words = math.ceil(payload / bus)
    if spec.get("steady_state", False):
        word_ns = bus / tput * 1e9
    else:
        # Split the anchor between the large-payload throughput and the
        # asymptote: their geometric mean equals the anchor, so neither
        # drifts far from the measured maximum.
        c = bus * payload / tput ** 2 * 1e18
        word_ns = (-base + math.sqrt(base * base + 4.0 * words * c)) / (2.0 * words)
    if word_ns <= 0:
        raise ConfigError(f"{name}: anchors leave no time for data beats")
    base_model = ChannelTimingModel(name, base, bus, clock, word_ns * 1e-9 * clock)
    stall_ns = float(spec.get("stall_ns", 0.0))
    if "anchor_min_throughput" in spec:
        p_min = int(spec["anchor_min_payload"])
        stall_ns = p_min / float(spec["anchor_min_throughput"]) * 1e9 - base_model.transfer_time(p_min)
    elif "stall_fraction" in spec:
        p_min = int(spec.get("anchor_min_payload", bus))
        stall_ns = base_model.transfer_time(p_min) * (1.0 / float(spec["stall_fraction"]) - 1.0)
    anchors = {k: v for k, v in spec.items() if k.startswith("anchor") or k == "base_latency_ns"}
    return ChannelTimingModel(
        name=name,
        base_latency_ns=base,
        bus_width=bus,
        clock_hz=clock,
        word_cost=base_model.word_cost,
        stall_period=int(spec.get("stall_period", 0)),
        stall_magnitude=float(spec.get("stall_magnitude", 0.0)),
        stall_ns=stall_ns,
        jitter=spec.get("jitter", "none"),
        jitter_ns=float(spec.get("jitter_ns", 0.0)),
        direction=spec.get("direction", ""),
        kind=spec.get("kind", ""),
        anchors=anchors,
    )


@dataclass(frozen=True)
class PresetLibrary:
    channels: dict
    gpio: dict
    rmsg: dict

    def names(self) -> list[str]:
        return sorted(self.channels)

    def get(self, name: str):
        try:
            return self.channels[name]
        except KeyError:
            raise ConfigError(
                f"unknown preset {name!r}; available: {', '.join(self.names())}") from None


def parse_presets(text: str) -> PresetLibrary:
    doc = loads_toml(text)
    unknown = set(doc) - {"channel", "gpio", "rmsg"}
    if unknown:
        raise ConfigError(f"unknown preset sections {sorted(unknown)}")
    channels = {name: channel_from_anchors(name, spec)
                for name, spec in doc.get("channel", {}).items()}
    gpio = {}
    for name, spec in doc.get("gpio", {}).items():
        g = GpioPreset(name, int(spec["bytes_per_handshake"]), int(spec["iterations"]),
                       int(spec["handshakes"]),
                       tuple((float(f), int(a), int(b)) for f, a, b in spec["points"]))
        gpio[name] = g
        for f, _, _ in g.points:
            ch = g.channel(f)
            channels[ch.name] = ch
    rmsg = {}
    for name, spec in doc.get("rmsg", {}).items():
        anchors = {d: tuple((int(p), float(t)) for p, t in spec[d])
                   for d in ("apu2rpu", "rpu2apu")}
        m = RmsgModel(name, float(spec["max_rate"]), anchors)
        rmsg[name] = m
        for d in anchors:
            ch = m.channel(d)
            channels[ch.name] = ch
    return PresetLibrary(channels, gpio, rmsg)


@lru_cache(maxsize=1)
def presets() -> PresetLibrary:
    text = resources.files("ionseq").joinpath("presets.toml").read_text()
    return parse_presets(text)


def get_preset(name: str):
    return presets().get(name)


def rmsg_model(direction: str, payload: int, preset: str = "zcu111/rmsg") -> float:
    """Median Rmsg transfer time in ns."""
    return presets().rmsg[preset].transfer_time(direction, payload)


@dataclass
class TrialResult:
    payload: int
    times_ns: np.ndarray
    throughputs: np.ndarray

    @property
    def time_stats(self) -> TrialStats:
        return TrialStats.from_samples(self.times_ns)

    @property
    def throughput_stats(self) -> TrialStats:
        return TrialStats.from_samples(self.throughputs)

    @property
    def stalled(self) -> int:
        return int(np.count_nonzero(self.times_ns > self.times_ns.min()))

    def histogram(self, bins: int = 20) -> list[tuple[float, float, int]]:
        counts, edges = np.histogram(self.throughputs, bins=bins)
        return [(float(edges[i]), float(edges[i + 1]), int(c)) for i, c in enumerate(counts)]


def run_trials(model, payload: int, n: int, seed: int = 0) -> TrialResult:
    """Simulate `n` back-to-back transfers with a deterministic seed."""
    if n < 1:
        raise ConfigError(f"need at least one trial, got {n}")
    rng = np.random.default_rng(seed)
    times = np.array([model.trial_time(payload, i, rng) for i in range(n)])
    return TrialResult(payload, times, payload / times * 1e9)


def power_of_two_sweep(lo: int = 4, hi: int = 1 << 20) -> list[int]:
    out = []
    p = lo
    while p <= hi:
        out.append(p)
        p *= 2
    return out
