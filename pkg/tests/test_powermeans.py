import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rffkpkm import InvalidInput, PowerSchedule, advance, gradient_weights, power_mean

mpmath.mp.dps = 60

positive_vectors = st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=12).map(np.array)
exponents = st.floats(-1e4, 10.0).filter(lambda s: abs(s) > 1e-3)


def mp_power_mean(y, s):
    y = [mpmath.mpf(float(v)) for v in y]
    s = mpmath.mpf(s)
    return (sum(v ** s for v in y) / len(y)) ** (1 / s)


def mp_gradient(y, s):
    y = [mpmath.mpf(float(v)) for v in y]
    s = mpmath.mpf(s)
    k = len(y)
    inner = sum(v ** s for v in y) / k
    return [(v ** (s - 1) / k) / inner ** (1 - 1 / s) for v in y]


def test_two_point_value():
    # ((1 + 100**-50) / 2) ** (-1/50) is 2**(1/50) to double precision
    assert math.isclose(power_mean([1.0, 100.0], -50.0), 2.0 ** (1 / 50), rel_tol=1e-14)


def test_classical_means():
    y = np.array([1.0, 2.0, 4.0])
    assert math.isclose(power_mean(y, 1.0), 7.0 / 3.0)
    assert math.isclose(power_mean(y, -1.0), 3.0 / (1 + 0.5 + 0.25))
    assert math.isclose(power_mean(y, 2.0), math.sqrt(21.0 / 3.0))


@settings(max_examples=200, deadline=None)
@given(y=positive_vectors, s=exponents)
def test_matches_high_precision_oracle(y, s):
    assert math.isclose(power_mean(y, s), float(mp_power_mean(y, s)), rel_tol=1e-11)


@settings(max_examples=200, deadline=None)
@given(y=positive_vectors, s=exponents)
def test_bounded_by_min_and_max(y, s):
    m = power_mean(y, s)
    assert y.min() <= m <= y.max()


@settings(max_examples=200, deadline=None)
@given(y=positive_vectors, s1=exponents, s2=exponents)
def test_monotone_in_exponent(y, s1, s2):
    lo, hi = sorted((s1, s2))
    assert power_mean(y, lo) <= power_mean(y, hi) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(y=positive_vectors, s=exponents, c=st.floats(1e-3, 1e3))
def test_positively_homogeneous(y, s, c):
    assert math.isclose(power_mean(c * y, s), c * power_mean(y, s), rel_tol=1e-12)


def test_limit_carries_count_factor():
    # for separated vectors M_s -> min * k**(-1/s), not min itself
    y = np.array([2.0, 5.0, 9.0, 30.0])
    assert math.isclose(power_mean(y, -500.0), 2.0 * 4 ** (1 / 500), rel_tol=1e-12)
    assert math.isclose(power_mean(y, -1e6), 2.0, rel_tol=2e-6)


def test_extreme_exponents_stay_finite():
    y = np.array([1e-12, 1e12, 3.0])
    for s in (-1e6, -1e3, 50.0):
        assert np.isfinite(power_mean(y, s))
    # the unique minimum carries weight k**(-1/s), everything else underflows
    np.testing.assert_allclose(gradient_weights(y, -1e6), [3.0 ** 1e-6, 0.0, 0.0],
                               rtol=1e-12, atol=0.0)


def test_batched_over_last_axis():
    Y = np.array([[1.0, 4.0], [2.0, 2.0], [3.0, 9.0]])
    np.testing.assert_allclose(power_mean(Y, -2.0), [power_mean(r, -2.0) for r in Y])
    np.testing.assert_allclose(gradient_weights(Y, -2.0),
                               np.stack([gradient_weights(r, -2.0) for r in Y]))


def test_gradient_known_value():
    np.testing.assert_allclose(gradient_weights([1.0, 4.0], -1.0), [1.28, 0.08], rtol=1e-14)


@settings(max_examples=150, deadline=None)
@given(y=positive_vectors, s=st.floats(-300.0, -0.01))
def test_gradient_matches_high_precision_oracle(y, s):
    want = np.array([float(g) for g in mp_gradient(y, s)])
    got = gradient_weights(y, s)
    big = want > 1e-250
    np.testing.assert_allclose(got[big], want[big], rtol=1e-9)
    assert np.all(got[~big] <= 1e-250)


@settings(max_examples=150, deadline=None)
@given(y=positive_vectors, s=st.floats(-1e3, -0.01))
def test_euler_identity_and_zero_homogeneity(y, s):
    w = gradient_weights(y, s)
    m = power_mean(y, s)
    # M is homogeneous of degree one, so sum_j y_j dM/dy_j = M
    assert math.isclose(float(w @ y), m, rel_tol=1e-9)
    np.testing.assert_allclose(gradient_weights(7.5 * y, s), w, rtol=1e-9, atol=1e-300)


@pytest.mark.parametrize("bad", [[], [0.0, 1.0], [-1.0, 2.0], [np.nan, 1.0], [np.inf]])
def test_rejects_invalid_vectors(bad):
    with pytest.raises(InvalidInput):
        power_mean(bad, -1.0)
    with pytest.raises(InvalidInput):
        gradient_weights(bad, -1.0)


def test_rejects_zero_exponent():
    with pytest.raises(InvalidInput):
        power_mean([1.0, 2.0], 0.0)
    with pytest.raises(InvalidInput):
        gradient_weights([1.0, 2.0], 0.0)


def test_schedule_cadence_and_floor():
    sched = PowerSchedule(s0=15.0, gamma=2.0, cadence=3, s_floor=-100.0)
    s = sched.initial()
    assert s == -15.0
    seen = []
    for t in range(1, 10):
        s = sched.advance(s, t)
        seen.append(s)
    assert seen == [-15.0, -15.0, -30.0, -30.0, -30.0, -60.0, -60.0, -60.0, -100.0]
    assert sched.exhausted(-100.0) and not sched.exhausted(-60.0)
    assert PowerSchedule(gamma=1.0).exhausted(-15.0)


def test_schedule_validation():
    for kw in ({"s0": 0.0}, {"gamma": 0.9}, {"cadence": 0}, {"s_floor": 1.0}):
        with pytest.raises(InvalidInput):
            PowerSchedule(**kw)
    with pytest.raises(InvalidInput):
        advance(PowerSchedule(), 1.0, 3)


@settings(max_examples=100, deadline=None)
@given(s0=st.floats(0.1, 1e3), gamma=st.floats(1.0, 3.0), cadence=st.integers(1, 5),
       steps=st.integers(1, 300))
def test_schedule_is_nonincreasing_and_floored(s0, gamma, cadence, steps):
    sched = PowerSchedule(s0=-s0, gamma=gamma, cadence=cadence)
    s = sched.initial()
    assume(s < 0)
    for t in range(1, steps + 1):
        nxt = sched.advance(s, t)
        assert sched.s_floor <= nxt <= s
        s = nxt
