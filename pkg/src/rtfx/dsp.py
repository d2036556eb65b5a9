"""Delay lines, sparse rational transfer functions and block filtering.

Every effect in the package reduces to a transfer function in z^-1 whose
taps sit at a handful of (possibly very long) integer lags.  Filtering is
done in direct form I with explicit input/output history rings, so the
feedback term of a sample is always read before that sample is written.

Block processing is vectorised in runs no longer than the shortest feedback
lag.  Each output sample is evaluated with the same sequence of floating
point operations no matter how the input is chunked, which makes the output
bit-identical across any block partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

DEFAULT_CAPACITY = 1 << 20  # samples of history per ring
STABILITY_EPS = 1e-9

# below this feedback lag the per-sample Python loop beats numpy dispatch
_SCALAR_LAG_LIMIT = 24


class DSPError(Exception):
    """Base class for signal-processing errors."""


class ConfigurationError(DSPError, ValueError):
    pass


class NumericOverflowError(DSPError, ArithmeticError):
    """Raised when filtering yields a non-finite sample."""

    def __init__(self, frame: int, channel: int = 0):
        self.frame = frame
        self.channel = channel
        super().__init__(f"non-finite output at frame {frame} (channel {channel})")


class AnalysisError(DSPError):
    """Root finding failed; ``partial`` holds whatever was computed."""

    def __init__(self, message: str, partial: "StabilityReport | None" = None):
        super().__init__(message)
        self.partial = partial


# ---------------------------------------------------------------------------
# Audio blocks


@dataclass
class AudioBlock:
    """A frame buffer of shape (channels, frames) at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[np.newaxis, :]
        if s.ndim != 2 or s.shape[0] < 1:
            raise ValueError(f"samples must be (channels, frames), got shape {s.shape}")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        self.samples = s
        self.sample_rate_hz = int(self.sample_rate_hz)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def frames(self) -> int:
        return self.samples.shape[1]

    @classmethod
    def zeros(cls, channels: int, frames: int, sample_rate_hz: int) -> "AudioBlock":
        return cls(np.zeros((channels, frames)), sample_rate_hz)

    @classmethod
    def concat(cls, blocks: Iterable["AudioBlock"]) -> "AudioBlock":
        blocks = list(blocks)
        if not blocks:
            raise ValueError("cannot concatenate an empty block list")
        rate = blocks[0].sample_rate_hz
        if any(b.sample_rate_hz != rate for b in blocks):
            raise ValueError("blocks have mixed sample rates")
        return cls(np.concatenate([b.samples for b in blocks], axis=1), rate)

    def split(self, block_frames: int) -> list["AudioBlock"]:
        """Cut into consecutive blocks of ``block_frames`` (last may be short)."""
        if block_frames < 1:
            raise ValueError("block_frames must be >= 1")
        return [
            AudioBlock(self.samples[:, i:i + block_frames], self.sample_rate_hz)
            for i in range(0, self.frames, block_frames)
        ]


# ---------------------------------------------------------------------------
# Delay line


class DelayLine:
    """Integer delay of ``delay`` samples over a circular buffer.

    ``tick`` returns the input submitted ``delay`` ticks earlier, zero until
    the line has filled.
    """

    def __init__(self, delay: int, capacity: int = DEFAULT_CAPACITY):
        if delay < 0:
            raise ConfigurationError(f"delay must be >= 0, got {delay}")
        if delay > capacity:
            raise ConfigurationError(f"delay {delay} exceeds capacity {capacity}")
        self.delay = int(delay)
        self._buf = np.zeros(max(self.delay, 1))
        self._pos = 0

    def tick(self, x: float) -> float:
        if self.delay == 0:
            return x
        out = float(self._buf[self._pos])
        self._buf[self._pos] = x
        self._pos = (self._pos + 1) % self.delay
        return out

    def reset(self):
        self._buf[:] = 0.0
        self._pos = 0


def delay_line_tick(state: DelayLine, x: float) -> float:
    return state.tick(x)


# ---------------------------------------------------------------------------
# Transfer functions


Taps = tuple[tuple[int, float], ...]


def _normalise_taps(taps: Iterable[tuple[int, float]], what: str) -> Taps:
    out = []
    for lag, coeff in taps:
        if int(lag) != lag or lag < 0:
            raise ConfigurationError(f"{what}: lag must be a non-negative integer, got {lag!r}")
        c = float(coeff)
        if not math.isfinite(c):
            raise ConfigurationError(f"{what}: coefficient at lag {lag} is not finite")
        out.append((int(lag), c))
    for (a, _), (b, _) in zip(out, out[1:]):
        if b <= a:
            raise ConfigurationError(f"{what}: lags must be strictly increasing ({a} then {b})")
    return tuple(out)


@dataclass(frozen=True)
class SparseRationalTF:
    """H(z) = sum_k b_k z^-lag_k / (1 + sum_m a_m z^-lag_m).

    ``numerator`` and ``denominator`` are tuples of ``(lag, coeff)`` with
    strictly increasing lags; the denominator starts with ``(0, 1.0)``.
    """

    numerator: Taps
    denominator: Taps = ((0, 1.0),)
    name: str = ""

    def __post_init__(self):
        num = _normalise_taps(self.numerator, "numerator")
        den = _normalise_taps(self.denominator, "denominator")
        if not den or den[0] != (0, 1.0):
            raise ConfigurationError("denominator must begin with the lag-0 entry 1.0")
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @property
    def feedback(self) -> Taps:
        return self.denominator[1:]

    @property
    def is_fir(self) -> bool:
        return len(self.denominator) == 1

    @property
    def max_lag(self) -> int:
        lags = [lag for lag, _ in self.numerator + self.denominator]
        return max(lags) if lags else 0

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense (b, a) coefficient arrays, as used by ``scipy.signal``."""
        b = np.zeros((self.numerator[-1][0] + 1) if self.numerator else 1)
        for lag, c in self.numerator:
            b[lag] = c
        a = np.zeros(self.denominator[-1][0] + 1)
        for lag, c in self.denominator:
            a[lag] = c
        return b, a

    def frequency_response(self, omega: np.ndarray) -> np.ndarray:
        """Evaluate H(e^{j omega}) directly from the sparse taps."""
        omega = np.asarray(omega, dtype=np.float64)
        num = sum((c * np.exp(-1j * omega * lag) for lag, c in self.numerator),
                  np.zeros_like(omega, dtype=complex))
        den = sum((c * np.exp(-1j * omega * lag) for lag, c in self.denominator),
                  np.zeros_like(omega, dtype=complex))
        return num / den


# ---------------------------------------------------------------------------
# Filter state and block evaluation


class _Ring:
    """History of the last ``cap`` samples per channel."""

    __slots__ = ("buf", "cap", "pos")

    def __init__(self, channels: int, cap: int):
        self.cap = cap
        self.buf = np.zeros((channels, cap))
        self.pos = 0  # index of the oldest sample == next write slot

    def read(self, start: int, count: int) -> np.ndarray:
        """Samples at relative indices start..start+count-1 (all negative)."""
        i0 = (self.pos + start) % self.cap
        i1 = i0 + count
        if i1 <= self.cap:
            return self.buf[:, i0:i1]
        return np.concatenate((self.buf[:, i0:], self.buf[:, :i1 - self.cap]), axis=1)

    def write(self, x: np.ndarray):
        n = x.shape[1]
        if self.cap == 0:
            return
        if n >= self.cap:
            self.buf[:] = x[:, n - self.cap:]
            self.pos = 0
            return
        end = self.pos + n
        if end <= self.cap:
            self.buf[:, self.pos:end] = x
        else:
            k = self.cap - self.pos
            self.buf[:, self.pos:] = x[:, :k]
            self.buf[:, :end - self.cap] = x[:, k:]
        self.pos = end % self.cap

    def reset(self):
        self.buf[:] = 0.0
        self.pos = 0


def _window(ring: _Ring, cur: np.ndarray, start: int, count: int) -> np.ndarray:
    """Signal values at absolute block indices start..start+count-1.

    Negative indices come from the history ring, the rest from ``cur``.
    """
    if start >= 0:
        return cur[:, start:start + count]
    if start + count <= 0:
        return ring.read(start, count)
    return np.concatenate((ring.read(start, -start), cur[:, :start + count]), axis=1)


class FilterState:
    """Input/output histories for one transfer function, zero-initialised."""

    def __init__(self, tf: SparseRationalTF, channels: int = 1,
                 capacity: int = DEFAULT_CAPACITY):
        if tf.max_lag > capacity:
            raise ConfigurationError(
                f"{tf.name or 'filter'}: lag {tf.max_lag} exceeds capacity {capacity}")
        self.channels = channels
        self.capacity = capacity
        x_cap = tf.numerator[-1][0] if tf.numerator else 0
        y_cap = tf.denominator[-1][0]
        self.inputs = _Ring(channels, x_cap)
        self.outputs = _Ring(channels, y_cap)
        self.frames_seen = 0

    def covers(self, tf: SparseRationalTF) -> bool:
        x_cap = tf.numerator[-1][0] if tf.numerator else 0
        return self.inputs.cap >= x_cap and self.outputs.cap >= tf.denominator[-1][0]

    def reset(self):
        self.inputs.reset()
        self.outputs.reset()
        self.frames_seen = 0


def _feedback_scalar(ff: np.ndarray, ring: _Ring, fb: Taps) -> np.ndarray:
    channels, n = ff.shape
    hist_len = fb[-1][0]
    hist = ring.read(-hist_len, hist_len)
    y = np.empty_like(ff)
    for ch in range(channels):
        buf = hist[ch].tolist() + [0.0] * n
        src = ff[ch].tolist()
        for i in range(n):
            acc = src[i]
            j = hist_len + i
            for lag, a in fb:
                acc -= a * buf[j - lag]
            buf[j] = acc
        y[ch] = buf[hist_len:]
    return y


def tf_process_block(tf: SparseRationalTF, state: FilterState, block: AudioBlock) -> AudioBlock:
    """Filter one block, carrying history across calls through ``state``."""
    if not state.covers(tf):
        raise ConfigurationError(f"{tf.name or 'filter'}: state history too small for this filter")
    if block.channels != state.channels:
        raise ConfigurationError(
            f"block has {block.channels} channels, state was built for {state.channels}")
    x = block.samples
    n = x.shape[1]

    ff = np.zeros_like(x)
    for lag, b in tf.numerator:
        ff += b * _window(state.inputs, x, -lag, n)

    fb = tf.feedback
    if not fb:
        y = ff
    elif fb[0][0] < _SCALAR_LAG_LIMIT:
        y = _feedback_scalar(ff, state.outputs, fb)
    else:
        y = ff.copy()
        step = fb[0][0]
        for c0 in range(0, n, step):
            c1 = min(c0 + step, n)
            seg = y[:, c0:c1]
            for lag, a in fb:
                # y[c0-lag : c1-lag] lies strictly before c0 because c1-c0 <= lag
                seg -= a * _window(state.outputs, y, c0 - lag, c1 - c0)

    finite = np.isfinite(y)
    if not finite.all():
        bad = np.argwhere(~finite)
        ch, frame = bad[np.argmin(bad[:, 1])]
        raise NumericOverflowError(state.frames_seen + int(frame), int(ch))

    state.inputs.write(x)
    state.outputs.write(y)
    state.frames_seen += n
    return AudioBlock(y, block.sample_rate_hz)


def impulse_response(tf: SparseRationalTF, length: int) -> np.ndarray:
    if length < 1:
        raise ValueError("length must be >= 1")
    x = np.zeros((1, length))
    x[0, 0] = 1.0
    state = FilterState(tf, 1, capacity=max(tf.max_lag, 1))
    return tf_process_block(tf, state, AudioBlock(x, 1)).samples[0]


# ---------------------------------------------------------------------------
# Stability


@dataclass
class StabilityReport:
    """Poles of the denominator after substituting w = z^gcd.

    ``poles`` are roots of the reversed, gcd-reduced denominator, i.e. the
    values of z^gcd at which the denominator vanishes; the filter is stable
    when every such value lies inside the unit circle.
    """

    reduced_lag_gcd: int
    poles: list[complex] = field(default_factory=list)
    pole_magnitudes: list[float] = field(default_factory=list)
    classification: str = "fir"

    @property
    def max_magnitude(self) -> float:
        return max(self.pole_magnitudes, default=0.0)


def classify_magnitudes(mags: Sequence[float], eps: float = STABILITY_EPS) -> str:
    if not mags:
        return "fir"
    top = max(mags)
    if top < 1.0 - eps:
        return "stable"
    if top <= 1.0 + eps:
        return "marginal"
    return "unstable"


def analyze_stability(tf: SparseRationalTF, eps: float = STABILITY_EPS) -> StabilityReport:
    fb = tf.feedback
    if not fb:
        return StabilityReport(reduced_lag_gcd=0)
    step = reduce(math.gcd, (lag for lag, _ in fb))
    degree = fb[-1][0] // step
    # den(y) = 1 + sum a_m y^(lag/step); poles in w = 1/y are roots of the reversed polynomial
    coeffs = np.zeros(degree + 1)
    coeffs[0] = 1.0
    for lag, a in fb:
        coeffs[lag // step] = a
    partial = StabilityReport(reduced_lag_gcd=step, classification="unknown")
    try:
        poles = np.roots(coeffs)
    except np.linalg.LinAlgError as exc:
        raise AnalysisError(f"root finding failed: {exc}", partial) from exc
    if len(poles) != degree or not np.all(np.isfinite(poles)):
        partial.poles = [complex(p) for p in poles]
        raise AnalysisError("root finding did not converge", partial)
    poles = sorted((complex(p) for p in poles), key=lambda p: (-abs(p), p.real, p.imag))
    mags = [abs(p) for p in poles]
    return StabilityReport(step, poles, mags, classify_magnitudes(mags, eps))
