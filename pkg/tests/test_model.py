import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from selfrepel.errors import DimensionMismatch, NonPositiveCoefficient
from selfrepel.model import (EnvState, FullState, ModelSpec, apply_generator,
                             env_to_full, eta_eval, eval_F_prime, full_to_env,
                             g_observable, h_norm_squared, h_observable,
                             pi_log_density, pi_sample, reduced_drift,
                             sigma2_bounds, validate_model)
from selfrepel.poly import PolyTestFn

finite = st.floats(-50, 50, allow_nan=False)
coef = st.floats(0.05, 5.0)


# validate_model

def test_canonical_is_valid(canonical):
    assert validate_model(canonical) is canonical


def test_zero_coefficient_rejected():
    with pytest.raises(NonPositiveCoefficient):
        validate_model(ModelSpec(2, (1.0, 0.0)))


def test_negative_coefficient_rejected():
    with pytest.raises(NonPositiveCoefficient):
        validate_model(ModelSpec(1, (-1.0,)))


def test_length_mismatch_rejected():
    with pytest.raises(DimensionMismatch):
        validate_model(ModelSpec(2, (1.0, 0.5), u0=(0.0,)))


def test_too_many_modes_rejected():
    with pytest.raises(DimensionMismatch):
        validate_model(ModelSpec(65, (1.0,) * 65))


def test_from_dict_round_trip(two_mode):
    assert ModelSpec.from_dict(two_mode.to_dict()) == two_mode
    with pytest.raises(DimensionMismatch):
        ModelSpec.from_dict({"a": [1.0], "b": 2})


# potential

def test_F_prime_values():
    assert eval_F_prime(0.0, [1.0, 3.0]) == 0.0
    assert eval_F_prime(np.pi / 2, [2.0]) == pytest.approx(-2.0)


def test_F_prime_is_odd_and_periodic(rng):
    x = rng.uniform(-20, 20, 1000)
    a = [1.0, 0.5, 0.25]
    np.testing.assert_allclose(eval_F_prime(x, a) + eval_F_prime(-x, a), 0,
                               atol=1e-12)
    np.testing.assert_allclose(eval_F_prime(x + 2 * np.pi, a), eval_F_prime(x, a),
                               atol=1e-12)


# transforms

def test_full_to_env_at_zero(rng):
    u, v = rng.normal(size=3), rng.normal(size=3)
    env = full_to_env(FullState(0.0, u, v))
    np.testing.assert_array_equal(env.c, u)
    np.testing.assert_array_equal(env.s, -v)


def test_full_to_env_at_pi():
    env = full_to_env(FullState(np.pi, [0.3], [-0.7]))
    np.testing.assert_allclose(env.c, [-0.3], atol=1e-15)
    np.testing.assert_allclose(env.s, [-0.7], atol=1e-15)


def test_env_to_full_example():
    full = env_to_full(EnvState([0.0], [1.0]), np.pi / 2)
    np.testing.assert_allclose(full.u, [1.0], atol=1e-15)
    np.testing.assert_allclose(full.v, [0.0], atol=1e-15)


def test_env_to_full_at_zero(rng):
    c, s = rng.normal(size=2), rng.normal(size=2)
    full = env_to_full(EnvState(c, s), 0.0)
    np.testing.assert_array_equal(full.u, c)
    np.testing.assert_array_equal(full.v, -s)


@settings(max_examples=200, deadline=None)
@given(x=finite, u=st.lists(finite, min_size=3, max_size=3),
       v=st.lists(finite, min_size=3, max_size=3))
def test_transform_round_trip_and_radius(x, u, v):
    env = full_to_env(FullState(x, u, v))
    back = env_to_full(env, x)
    scale = 1.0 + np.max(np.abs(u + v))
    assert np.max(np.abs(back.u - np.asarray(u))) <= 1e-12 * scale
    assert np.max(np.abs(back.v - np.asarray(v))) <= 1e-12 * scale
    np.testing.assert_allclose(env.c ** 2 + env.s ** 2,
                               np.asarray(u) ** 2 + np.asarray(v) ** 2,
                               rtol=1e-12, atol=1e-12 * scale ** 2)
    again = full_to_env(env_to_full(env, x))
    assert np.max(np.abs(again.c - env.c)) <= 1e-12 * scale


@settings(max_examples=200, deadline=None)
@given(x=finite, u=st.lists(finite, min_size=2, max_size=2),
       v=st.lists(finite, min_size=2, max_size=2),
       a=st.lists(coef, min_size=2, max_size=2))
def test_g_equals_lifted_drift(x, u, v, a):
    state = FullState(x, u, v)
    drift = reduced_drift(state, a)
    g = g_observable(full_to_env(state), a)
    assert abs(g - drift) <= 1e-10 * (1.0 + np.max(np.abs(u + v)))


# observables

def test_g_and_h_examples():
    a = [1.0, 0.5]
    assert g_observable(EnvState([0.3, 0.1], [0.0, 0.0]), a) == 0.0
    assert g_observable(EnvState([0.0, 0.0], [1.0, 1.0]), a) == pytest.approx(2.0)
    assert h_observable(EnvState([0.0, 0.0], [0.4, 2.0]), a) == 0.0
    assert h_observable(EnvState([1.0, 1.0], [0.0, 0.0]), a) == pytest.approx(1.5)


def test_h_norm_matches_pi_average(rng):
    a = [1.0, 0.5]
    h = h_observable(pi_sample(rng, a, size=200_000), a)
    m = np.mean(h ** 2)
    se = np.std(h ** 2, ddof=1) / np.sqrt(h.size)
    assert abs(m - h_norm_squared(a)) < 3 * se
    assert h_norm_squared(a) == pytest.approx(1.125)


def test_eta_examples():
    assert eta_eval(EnvState([1.0], [0.0]), [1.0], 0.0) == pytest.approx(1.0)
    assert eta_eval(EnvState([0.0], [1.0]), [1.0], np.pi / 2) == pytest.approx(-1.0)


def test_eta_slope_at_origin_is_minus_g(rng):
    a = [1.0, 0.5, 0.3]
    env = EnvState(rng.normal(size=3), rng.normal(size=3))
    errs = []
    for h in (1e-2, 5e-3):
        slope = (eta_eval(env, a, h) - eta_eval(env, a, -h)) / (2 * h)
        errs.append(abs(slope + g_observable(env, a)))
    # central difference: error shrinks by about 4 when h halves
    assert errs[1] < errs[0] / 3
    assert errs[1] < 1e-3


# invariant law

def test_pi_sample_variances(rng):
    env = pi_sample(rng, [1.0], size=100_000)
    c = env.c[:, 0]
    var = c.var(ddof=1)
    # stderr of a Gaussian sample variance is sigma^2 sqrt(2/(n-1))
    assert abs(var - 1.0) < 3 * np.sqrt(2 / (c.size - 1))
    env2 = pi_sample(rng, [1.0, 2.0], size=100_000)
    assert env2.c[:, 1].var() == pytest.approx(0.125, rel=0.03)
    z = env2.stacked()
    corr = np.corrcoef(z.T)
    off = corr[~np.eye(4, dtype=bool)]
    assert np.max(np.abs(off)) < 4 / np.sqrt(100_000)


def test_log_density_values():
    a = [1.0]
    assert pi_log_density(EnvState([0.0], [0.0]), a) == pytest.approx(-np.log(2 * np.pi))
    assert pi_log_density(EnvState([1.0], [0.0]), a) == pytest.approx(-0.5 - np.log(2 * np.pi))


def test_density_integrates_to_one():
    a = [1.0]

    def dens(s, c):
        return np.exp(pi_log_density(EnvState([c], [s]), a))

    total, _ = integrate.dblquad(dens, -8, 8, -8, 8, epsabs=1e-10)
    assert abs(total - 1.0) < 1e-6


def test_density_two_modes_factorizes(rng):
    a = [1.0, 0.5]
    env = EnvState(rng.normal(size=2), rng.normal(size=2))
    var = 1.0 / (np.array(a) * np.array([1.0, 4.0]))
    expect = np.sum(-0.5 * (env.c ** 2 + env.s ** 2) / var - np.log(2 * np.pi * var))
    assert pi_log_density(env, a) == pytest.approx(expect)


# generator

def test_generator_kills_constants(rng):
    env = pi_sample(rng, [1.0, 0.5], size=10)
    one = PolyTestFn.constant(1.0, 4)
    for variant in ("ito-corrected", "as-printed"):
        np.testing.assert_array_equal(apply_generator(one, env, [1.0, 0.5], variant), 0.0)


def test_generator_hand_value():
    out = apply_generator(PolyTestFn.c(1, 1), EnvState([0.5], [2.0]), [1.0])
    assert out == pytest.approx(-3.25)


def test_generator_matches_finite_time_expectation(rng):
    """``E[f(Z_dt)] - f(z)`` over many one-step Euler moves ~ ``dt * Gf(z)``."""
    from selfrepel.integrate import _env_update, _mode_arrays
    spec = ModelSpec(2, (1.0, 0.5))
    j, ja, jj = _mode_arrays(spec)
    z0 = EnvState([0.4, -0.3], [0.8, 0.2])
    f = PolyTestFn.parse("c1*s2", 2) + PolyTestFn.parse("s1^2", 2)
    dt, m = 1e-3, 2_000_000
    dB = rng.standard_normal(m) * np.sqrt(dt)
    c = np.broadcast_to(z0.c, (m, 2))
    s = np.broadcast_to(z0.s, (m, 2))
    c1, s1, _ = _env_update(c, s, j, ja, jj, dB, dt)
    inc = (f(EnvState(c1, s1).stacked()) - f(z0.stacked())) / dt
    se = inc.std(ddof=1) / np.sqrt(m)
    gf = apply_generator(f, z0, spec.a)
    assert abs(inc.mean() - gf) < 4 * se + 0.02


def _basis(n_vars, max_degree):
    for exps in itertools.product(range(max_degree + 1), repeat=n_vars):
        if 0 < sum(exps) <= max_degree:
            yield PolyTestFn({exps: 1.0}, n_vars)


def test_generator_stationarity_degree_four():
    rng = np.random.default_rng(2024)
    a = [1.0]
    env = pi_sample(rng, a, size=1_000_000)
    for f in _basis(2, 4):
        vals = apply_generator(f, env, a)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        assert abs(vals.mean()) <= 3 * se + 1e-12, repr(f)


def test_generator_stationarity_two_modes():
    rng = np.random.default_rng(2025)
    a = [1.0, 0.5]
    env = pi_sample(rng, a, size=1_000_000)
    failures = 0
    basis = list(_basis(4, 2)) + [PolyTestFn.parse(t, 2) for t in
                                  ("c1^2*c2^2", "c1*s1*c2*s2", "s1^3*c2", "c2^4")]
    for f in basis:
        vals = apply_generator(f, env, a)
        se = vals.std(ddof=1) / np.sqrt(vals.size)
        failures += abs(vals.mean()) > 3 * se
    # about 0.3% of honest checks land outside 3 stderr; allow one
    assert failures <= 1


def test_as_printed_generator_is_not_stationary():
    rng = np.random.default_rng(7)
    env = pi_sample(rng, [1.0], size=1_000_000)
    vals = apply_generator(PolyTestFn.parse("c1^2", 1), env, [1.0], "as-printed")
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    assert abs(vals.mean() - 1.0) <= 3 * se
    assert vals.mean() > 10 * se


def test_unknown_variant():
    with pytest.raises(ValueError):
        apply_generator(PolyTestFn.c(1, 1), EnvState([0.0], [0.0]), [1.0], "other")


# bounds

def test_sigma2_bounds_examples():
    assert sigma2_bounds([1.0]) == (1.0, 3.0)
    assert sigma2_bounds([1.0, 0.5]) == (1.0, 3.25)
    assert sigma2_bounds([2.0]) == (1.0, 5.0)


@given(a=st.lists(coef, min_size=1, max_size=6), k=st.integers(0, 5),
       bump=st.floats(0.01, 2.0))
def test_sigma2_upper_bound_monotone(a, k, bump):
    k = k % len(a)
    lo, hi = sigma2_bounds(a)
    b = list(a)
    b[k] += bump
    assert lo <= hi
    assert sigma2_bounds(b)[1] > hi
