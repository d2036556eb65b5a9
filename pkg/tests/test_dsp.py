import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtfx.dsp import (
    AnalysisError,
    AudioBlock,
    ConfigurationError,
    DelayLine,
    FilterState,
    NumericOverflowError,
    SparseRationalTF,
    analyze_stability,
    delay_line_tick,
    impulse_response,
    tf_process_block,
)
from rtfx.effects import EchoParams, make_infinite_echo, make_multi_echo, make_multi_echo_rational

from conftest import direct_recursion, impulse

STRESS_UNIT_DELAY = SparseRationalTF(((0, 1.0), (1, math.sqrt(2) - 1)),
                             ((0, 1.0), (1, math.sqrt(2) - 1), (2, 1 - math.sqrt(2)), (3, -1.0)))
STRESS_REALTIME = SparseRationalTF(((0, 0.8), (50000, 0.56)),
                             ((0, 1.0), (50000, 0.7), (100000, -0.7), (150000, -1.0)))


def run(tf, x, blocks=None):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    state = FilterState(tf, x.shape[0])
    full = AudioBlock(x, 8000)
    parts = [full] if blocks is None else full.split(blocks)
    return np.concatenate([tf_process_block(tf, state, p).samples for p in parts], axis=1)


# --- delay line -------------------------------------------------------------

def test_delay_line_shift():
    dl = DelayLine(3)
    assert [delay_line_tick(dl, v) for v in [1, 0, 0, 0]] == [0, 0, 0, 1]


def test_delay_line_zero_is_identity():
    dl = DelayLine(0)
    assert [dl.tick(v) for v in [0.3, -1.0, 2.5]] == [0.3, -1.0, 2.5]


def test_delay_line_long_matches_index_shift():
    D = 50000
    x = impulse(D + 10)
    dl = DelayLine(D)
    y = np.array([dl.tick(v) for v in x])
    expected = np.zeros_like(x)
    expected[D:] = x[:len(x) - D]
    assert np.array_equal(y, expected)
    assert np.flatnonzero(y)[0] == D


def test_delay_line_capacity():
    with pytest.raises(ConfigurationError):
        DelayLine(100, capacity=10)


# --- transfer functions -----------------------------------------------------

def test_tf_validation():
    with pytest.raises(ConfigurationError):
        SparseRationalTF(((0, 1.0),), ((0, 2.0),))
    with pytest.raises(ConfigurationError):
        SparseRationalTF(((3, 1.0), (1, 1.0)))
    with pytest.raises(ConfigurationError):
        SparseRationalTF(((0, float("nan")),))
    with pytest.raises(ConfigurationError):
        SparseRationalTF(((-1, 1.0),))


def test_identity_filter():
    tf = SparseRationalTF(((0, 1.0),))
    x = np.random.default_rng(0).normal(size=(2, 300))
    assert np.array_equal(run(tf, x), x)


def test_stress_impulse_matches_direct_recursion():
    h = impulse_response(STRESS_UNIT_DELAY, 31)
    oracle = direct_recursion(STRESS_UNIT_DELAY.numerator, STRESS_UNIT_DELAY.denominator, impulse(31))
    np.testing.assert_allclose(h, oracle, rtol=0, atol=1e-12)


def test_block_partition_exact():
    tf = SparseRationalTF(((0, 0.5), (3, 0.25)), ((0, 1.0), (64, -0.5), (100, 0.2)))
    x = np.random.default_rng(1).uniform(-1, 1, size=(1, 4096))
    assert np.array_equal(run(tf, x), run(tf, x, blocks=64))


def test_scalar_path_partition_exact():
    x = np.random.default_rng(2).uniform(-1, 1, size=(2, 1000))
    assert np.array_equal(run(STRESS_UNIT_DELAY, x), run(STRESS_UNIT_DELAY, x, blocks=7))


def test_history_longer_than_block():
    x = np.random.default_rng(3).uniform(-1, 1, size=(1, 3000))
    tf = SparseRationalTF(((0, 1.0), (1000, 0.5)), ((0, 1.0), (700, -0.6)))
    y = run(tf, x, blocks=33)
    np.testing.assert_allclose(y[0], direct_recursion(tf.numerator, tf.denominator, x[0]),
                               atol=1e-12)


def test_impulse_multi_echo():
    h = impulse_response(make_multi_echo(EchoParams(0.5, 2, 3)), 8)
    assert h.tolist() == [1, 0, 0.5, 0, 0.25, 0, 0, 0]


def test_impulse_infinite_echo():
    h = impulse_response(make_infinite_echo(EchoParams(0.5, 1)), 40)
    np.testing.assert_allclose(h, 0.5 ** np.arange(40), rtol=0, atol=1e-15)


def test_fir_impulse_is_taps():
    tf = SparseRationalTF(((0, 0.1), (5, -0.3), (9, 0.7)))
    h = impulse_response(tf, 20)
    expected = np.zeros(20)
    expected[[0, 5, 9]] = [0.1, -0.3, 0.7]
    assert np.array_equal(h, expected)


def test_impulse_length_validation():
    with pytest.raises(ValueError):
        impulse_response(SparseRationalTF(((0, 1.0),)), 0)


def test_capacity_mismatch():
    small = SparseRationalTF(((0, 1.0),), ((0, 1.0), (2, -0.5)))
    big = SparseRationalTF(((0, 1.0),), ((0, 1.0), (20, -0.5)))
    state = FilterState(small)
    with pytest.raises(ConfigurationError):
        tf_process_block(big, state, AudioBlock(np.zeros(4), 8000))
    with pytest.raises(ConfigurationError):
        FilterState(big, capacity=10)


def test_overflow_names_frame():
    tf = SparseRationalTF(((0, 1.0),), ((0, 1.0), (1, -1e300)))
    x = np.zeros(10)
    x[0] = 1.0
    state = FilterState(tf)
    with pytest.raises(NumericOverflowError) as info:
        tf_process_block(tf, state, AudioBlock(x, 8000))
    # y[n] = 1e300^n overflows at n = 2
    assert info.value.frame == 2


# --- stability --------------------------------------------------------------

def test_stability_infinite_echo():
    rep = analyze_stability(make_infinite_echo(EchoParams(0.5, 7)))
    assert rep.reduced_lag_gcd == 7
    assert len(rep.poles) == 1
    assert rep.pole_magnitudes[0] == pytest.approx(0.5, abs=1e-12)
    assert rep.classification == "stable"


def test_stability_realtime_stress():
    rep = analyze_stability(STRESS_REALTIME)
    assert rep.reduced_lag_gcd == 50000
    assert rep.classification == "marginal"
    assert all(abs(m - 1) < 1e-9 for m in rep.pole_magnitudes)
    assert any(abs(p - 1) < 1e-9 for p in rep.poles)
    assert any(abs(p - complex(-0.85, 0.527)) < 5e-4 for p in rep.poles)
    assert any(abs(p - complex(-0.85, -0.527)) < 5e-4 for p in rep.poles)


def test_stability_fir():
    rep = analyze_stability(SparseRationalTF(((0, 1.0), (4, 0.5))))
    assert rep.classification == "fir" and rep.poles == []


def test_stability_unstable():
    rep = analyze_stability(SparseRationalTF(((0, 1.0),), ((0, 1.0), (3, -1.5))))
    assert rep.classification == "unstable"


def test_stability_nonconvergence(monkeypatch):
    def boom(_):
        raise np.linalg.LinAlgError("no convergence")
    monkeypatch.setattr(np, "roots", boom)
    with pytest.raises(AnalysisError) as info:
        analyze_stability(STRESS_REALTIME)
    assert info.value.partial.reduced_lag_gcd == 50000


# --- properties -------------------------------------------------------------

@st.composite
def sparse_tfs(draw):
    num_lags = sorted(draw(st.sets(st.integers(0, 40), min_size=1, max_size=4)))
    den_lags = sorted(draw(st.sets(st.integers(1, 60), max_size=3)))
    coeff = st.floats(-0.3, 0.3, allow_nan=False)
    num = tuple((lag, draw(coeff)) for lag in num_lags)
    den = ((0, 1.0),) + tuple((lag, draw(coeff)) for lag in den_lags)
    return SparseRationalTF(num, den)


@settings(max_examples=60, deadline=None)
@given(sparse_tfs(), st.integers(1, 97), st.integers(0, 2**32 - 1))
def test_block_size_invariance(tf, block, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, size=(2, 400))
    assert np.array_equal(run(tf, x), run(tf, x, blocks=block))


@settings(max_examples=40, deadline=None)
@given(sparse_tfs(), st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2**32 - 1))
def test_linearity(tf, a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(-1, 1, size=(2, 1, 300))
    lhs = run(tf, a * x + b * y)
    rhs = a * run(tf, x) + b * run(tf, y)
    scale = max(1.0, np.max(np.abs(lhs)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1 - 1e-6), st.integers(1, 5000))
def test_stress_quadratic_poles_on_unit_circle(g, D):
    tf = SparseRationalTF(((0, 1.0),), ((0, 1.0), (D, g), (2 * D, -g), (3 * D, -1.0)))
    rep = analyze_stability(tf)
    assert rep.classification == "marginal"
    assert all(abs(m - 1) < 1e-9 for m in rep.pole_magnitudes)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.95, 0.95), st.integers(1, 6), st.integers(1, 6), st.integers(5, 120))
def test_multi_echo_rational_identity(alpha, R, N, length):
    p = EchoParams(alpha, R, N)
    fir = impulse_response(make_multi_echo(p), length)
    rat = impulse_response(make_multi_echo_rational(p), length)
    np.testing.assert_allclose(rat, fir, rtol=0, atol=1e-12)
