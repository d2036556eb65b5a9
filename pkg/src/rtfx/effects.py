"""Filter constructors and the composite effects built from them.

All feedback lives inside ``SparseRationalTF`` nodes; graphs only chain
nodes in series or sum them in parallel, so a graph can never form an
algebraic loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .dsp import (
    DEFAULT_CAPACITY,
    AudioBlock,
    ConfigurationError,
    FilterState,
    SparseRationalTF,
    tf_process_block,
)


class ParameterError(ConfigurationError):
    pass


class SampleRateMismatch(ConfigurationError):
    pass


def _positive_int(name: str, value) -> int:
    if int(value) != value or value < 1:
        raise ParameterError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _open_unit(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {value!r}")
    return value


# ---------------------------------------------------------------------------
# Parameter records


@dataclass(frozen=True)
class EchoParams:
    alpha: float
    R: int
    N: int = 1

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ParameterError("alpha must be finite")
        _positive_int("R", self.R)
        _positive_int("N", self.N)


@dataclass(frozen=True)
class StressParams:
    """Gain ``K``, feedback gain ``g`` in (0, 1) and lattice delay ``D``."""

    K: float
    g: float
    D: int

    def __post_init__(self):
        if not math.isfinite(self.K) or self.K == 0:
            raise ParameterError(f"K must be finite and nonzero, got {self.K!r}")
        _open_unit("g", self.g)
        _positive_int("D", self.D)


STRESS_PRESETS = {
    # 8th-root-of-unity design: 1 + g = sqrt(2)
    "derivation": StressParams(K=1.0, g=math.sqrt(2.0) - 1.0, D=1),
    "realtime": StressParams(K=0.8, g=0.7, D=50000),
}


@dataclass(frozen=True)
class ReverbConfig:
    """Schroeder reverberator: four parallel combs into two series allpasses.

    If ``rt60_s`` is set the comb gains are derived from it at build time
    and ``comb_gains`` is ignored.  ``early_taps`` are (delay, gain) pairs
    of the early-reflection FIR; ``wet_gain`` scales the comb/allpass path.
    """

    comb_delays: tuple[int, ...] = (1310, 1636, 1813, 1927)
    comb_gains: tuple[float, ...] | None = None
    allpass_delays: tuple[int, ...] = (347, 113)
    allpass_gains: tuple[float, ...] = (0.7, 0.7)
    dry_gain: float = 1.0
    early_taps: tuple[tuple[int, float], ...] = ((441, 0.4), (882, 0.25))
    rt60_s: float | None = 1.0
    wet_gain: float = 0.25

    def __post_init__(self):
        if len(self.comb_delays) != 4:
            raise ParameterError("comb_delays needs exactly 4 entries")
        for d in self.comb_delays:
            _positive_int("comb delay", d)
        if len(set(self.comb_delays)) != 4:
            raise ParameterError("comb delays must be pairwise distinct")
        if len(self.allpass_delays) != 2 or len(self.allpass_gains) != 2:
            raise ParameterError("exactly 2 allpass delays and gains are required")
        for d in self.allpass_delays:
            _positive_int("allpass delay", d)
        for g in self.allpass_gains:
            _open_unit("allpass gain", g)
        if self.rt60_s is None:
            if self.comb_gains is None or len(self.comb_gains) != 4:
                raise ParameterError("comb_gains (4 entries) required when rt60_s is unset")
            for g in self.comb_gains:
                _open_unit("comb gain", g)
        elif not self.rt60_s > 0:
            raise ParameterError(f"rt60_s must be positive, got {self.rt60_s!r}")
        for d, _ in self.early_taps:
            _positive_int("early reflection delay", d)
        if not (math.isfinite(self.dry_gain) and math.isfinite(self.wet_gain)):
            raise ParameterError("dry/wet gains must be finite")

    def resolved_comb_gains(self, sample_rate_hz: int) -> tuple[float, ...]:
        if self.rt60_s is None:
            return tuple(self.comb_gains)
        # each pass through a comb must lose R/(fs*rt60) of the 60 dB budget
        return tuple(0.001 ** (d / (sample_rate_hz * self.rt60_s)) for d in self.comb_delays)


def default_chorus_taps(sample_rate_hz: int = 44100) -> tuple[tuple[int, float], ...]:
    """Dry voice plus two copies at 15 ms and 30 ms."""
    return ((0, 1.0), (int(0.015 * sample_rate_hz), 0.7), (int(0.030 * sample_rate_hz), 0.5))


# ---------------------------------------------------------------------------
# Transfer-function constructors


def make_multi_echo(p: EchoParams) -> SparseRationalTF:
    return SparseRationalTF(
        tuple((k * p.R, p.alpha ** k) for k in range(p.N)), name="multi_echo")


def make_multi_echo_rational(p: EchoParams) -> SparseRationalTF:
    """Closed form (1 - a^N z^-NR) / (1 - a z^-R) of the multi-echo filter."""
    if p.alpha == 0:
        return SparseRationalTF(((0, 1.0),), name="multi_echo_rational")
    return SparseRationalTF(
        ((0, 1.0), (p.N * p.R, -(p.alpha ** p.N))),
        ((0, 1.0), (p.R, -p.alpha)),
        name="multi_echo_rational",
    )


def make_infinite_echo(p: EchoParams) -> SparseRationalTF:
    if not abs(p.alpha) < 1:
        raise ParameterError(f"infinite echo needs |alpha| < 1, got {p.alpha}")
    if p.alpha == 0:
        return SparseRationalTF(((0, 1.0),), name="infinite_echo")
    return SparseRationalTF(((0, 1.0),), ((0, 1.0), (p.R, -p.alpha)), name="infinite_echo")


def make_comb(g: float, R: int) -> SparseRationalTF:
    """Feedback comb z^-R / (1 - g z^-R)."""
    g = _open_unit("comb gain", g)
    R = _positive_int("comb delay", R)
    return SparseRationalTF(((R, 1.0),), ((0, 1.0), (R, -g)), name=f"comb{R}")


def make_allpass(g: float, R: int) -> SparseRationalTF:
    """Schroeder allpass (-g + z^-R) / (1 - g z^-R)."""
    g = _open_unit("allpass gain", g)
    R = _positive_int("allpass delay", R)
    return SparseRationalTF(((0, -g), (R, 1.0)), ((0, 1.0), (R, -g)), name=f"allpass{R}")


def make_stress_generator(p: StressParams) -> SparseRationalTF:
    """K(1 + g y) / ((1 - y)(1 + (1+g) y + y^2)) with y = z^-D."""
    D = p.D
    return SparseRationalTF(
        ((0, p.K), (D, p.K * p.g)),
        ((0, 1.0), (D, p.g), (2 * D, -p.g), (3 * D, -1.0)),
        name="stress",
    )


def make_fir(taps: Sequence[tuple[int, float]], name: str = "fir") -> SparseRationalTF:
    delays = [d for d, _ in taps]
    if len(set(delays)) != len(delays):
        raise ParameterError(f"{name}: duplicate tap delays {sorted(delays)}")
    return SparseRationalTF(tuple(sorted((int(d), float(g)) for d, g in taps)), name=name)


def make_chorus(taps: Sequence[tuple[int, float]]) -> SparseRationalTF:
    if not any(d == 0 and g == 1.0 for d, g in taps):
        raise ParameterError("chorus taps must include the dry tap (0, 1)")
    return make_fir(taps, name="chorus")


# ---------------------------------------------------------------------------
# Graphs


class Node:
    """A transfer function plus its lazily allocated filter state."""

    def __init__(self, tf: SparseRationalTF, capacity: int = DEFAULT_CAPACITY):
        if tf.max_lag > capacity:
            raise ParameterError(
                f"{tf.name or 'filter'}: delay {tf.max_lag} exceeds engine capacity {capacity}")
        self.tf = tf
        self.capacity = capacity
        self.state: FilterState | None = None

    def process(self, x: np.ndarray, rate: int) -> np.ndarray:
        if self.state is None or self.state.channels != x.shape[0]:
            if self.state is not None and self.state.frames_seen:
                raise ConfigurationError("channel count changed mid-stream")
            self.state = FilterState(self.tf, x.shape[0], self.capacity)
        return tf_process_block(self.tf, self.state, AudioBlock(x, rate)).samples

    def reset(self):
        self.state = None

    def nodes(self) -> Iterator["Node"]:
        yield self


class Series:
    def __init__(self, items: Sequence["Element"]):
        self.items = list(items)

    def process(self, x: np.ndarray, rate: int) -> np.ndarray:
        for item in self.items:
            x = item.process(x, rate)
        return x

    def reset(self):
        for item in self.items:
            item.reset()

    def nodes(self) -> Iterator[Node]:
        for item in self.items:
            yield from item.nodes()


class Parallel:
    """Sum of ``gain * branch(x)`` over (gain, branch) pairs, in order."""

    def __init__(self, branches: Sequence[tuple[float, "Element"]]):
        if not branches:
            raise ParameterError("parallel group needs at least one branch")
        self.branches = [(float(g), b) for g, b in branches]

    def process(self, x: np.ndarray, rate: int) -> np.ndarray:
        out = np.zeros_like(x)
        for gain, branch in self.branches:
            y = branch.process(x, rate)
            out += y if gain == 1.0 else gain * y
        return out

    def reset(self):
        for _, branch in self.branches:
            branch.reset()

    def nodes(self) -> Iterator[Node]:
        for _, branch in self.branches:
            yield from branch.nodes()


Element = Union[Node, Series, Parallel]


@dataclass
class EffectGraph:
    root: Element
    sample_rate_hz: int
    gain: float = 1.0
    name: str = ""
    meta: dict = field(default_factory=dict)

    def process(self, block: AudioBlock) -> AudioBlock:
        if block.sample_rate_hz != self.sample_rate_hz:
            raise SampleRateMismatch(
                f"block rate {block.sample_rate_hz} Hz != graph rate {self.sample_rate_hz} Hz")
        y = self.root.process(block.samples, block.sample_rate_hz)
        if self.gain != 1.0:
            y = self.gain * y
        return AudioBlock(y, block.sample_rate_hz)

    def reset(self):
        self.root.reset()

    def nodes(self) -> list[Node]:
        return list(self.root.nodes())

    def transfer_functions(self) -> list[SparseRationalTF]:
        return [n.tf for n in self.nodes()]


def process_graph(graph: EffectGraph, block: AudioBlock) -> AudioBlock:
    return graph.process(block)


def single_node_graph(tf: SparseRationalTF, sample_rate_hz: int,
                      capacity: int = DEFAULT_CAPACITY) -> EffectGraph:
    return EffectGraph(Node(tf, capacity), sample_rate_hz, name=tf.name)


def identity_graph(sample_rate_hz: int) -> EffectGraph:
    return EffectGraph(Series([]), sample_rate_hz, name="identity")


def _reverb_element(cfg: ReverbConfig, sample_rate_hz: int, capacity: int) -> Element:
    gains = cfg.resolved_comb_gains(sample_rate_hz)
    combs = Parallel([(1.0, Node(make_comb(g, d), capacity))
                      for g, d in zip(gains, cfg.comb_delays)])
    diffuser = Series([combs] + [Node(make_allpass(g, d), capacity)
                                 for d, g in zip(cfg.allpass_delays, cfg.allpass_gains)])
    branches: list[tuple[float, Element]] = [
        (1.0, Node(SparseRationalTF(((0, cfg.dry_gain),), name="dry"), capacity))]
    if cfg.early_taps:
        branches.append((1.0, Node(make_fir(cfg.early_taps, "early"), capacity)))
    branches.append((cfg.wet_gain, diffuser))
    return Parallel(branches)


def make_schroeder_reverb(cfg: ReverbConfig | None = None, sample_rate_hz: int = 44100,
                          capacity: int = DEFAULT_CAPACITY) -> EffectGraph:
    cfg = cfg or ReverbConfig()
    return EffectGraph(_reverb_element(cfg, sample_rate_hz, capacity), sample_rate_hz,
                       name="reverb", meta={"config": cfg})


def make_stress_graph(p: StressParams, sample_rate_hz: int = 44100,
                      capacity: int = DEFAULT_CAPACITY) -> EffectGraph:
    return EffectGraph(Node(make_stress_generator(p), capacity), sample_rate_hz,
                       name="stress", meta={"params": p})


def make_reverberated_chorus(chorus_taps: Sequence[tuple[int, float]] | None = None,
                             reverb_cfg: ReverbConfig | None = None,
                             sample_rate_hz: int = 44100,
                             capacity: int = DEFAULT_CAPACITY) -> EffectGraph:
    taps = chorus_taps if chorus_taps is not None else default_chorus_taps(sample_rate_hz)
    cfg = reverb_cfg or ReverbConfig()
    root = Parallel([
        (1.0, _reverb_element(cfg, sample_rate_hz, capacity)),
        (1.0, Node(make_chorus(taps), capacity)),
    ])
    return EffectGraph(root, sample_rate_hz, name="reverberated_chorus",
                       meta={"config": cfg, "taps": tuple(taps)})
