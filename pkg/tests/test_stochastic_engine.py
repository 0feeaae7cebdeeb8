from __future__ import annotations

import numpy as np
import pytest

from mvgame import MarketParams, ParameterError, TimeGrid, make_rng
from mvgame.stochastic_engine import (
    brownian_bundle,
    measure_weight,
    simulate_chain,
    simulate_posterior,
    simulate_tangent,
)


def test_rng_streams_reproducible_and_distinct():
    a = make_rng(3, 1, "x").standard_normal(5)
    b = make_rng(3, 1, "x").standard_normal(5)
    c = make_rng(3, 2, "x").standard_normal(5)
    d = make_rng(3, 1, "y").standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert not np.allclose(a, d)


def test_grid():
    g = TimeGrid.from_dt(0.0, 1.0, 0.01)
    assert g.n_steps == 100
    assert g.dt == pytest.approx(0.01)
    assert g.times[-1] == 1.0
    with pytest.raises(ParameterError):
        TimeGrid(1.0, 1.0, 5)
    with pytest.raises(ParameterError):
        TimeGrid.from_dt(0.0, 1.0, 0.0)


def test_bundle_increment_variance():
    g = TimeGrid(0.0, 1.0, 50)
    b = brownian_bundle(g, 4000, seed=1)
    assert b.dW.shape == (4000, 50)
    assert b.dW.var() == pytest.approx(g.dt, rel=0.02)


def test_posterior_frozen_when_drifts_coincide():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.1, mu2=0.1, T=1.0)
    g = TimeGrid(0.0, 1.0, 100)
    post = simulate_posterior(0.3, g, params, brownian_bundle(g, 10, 0))
    np.testing.assert_allclose(post.values, 0.3)


def test_alternating_posterior_follows_mean_reversion_ode():
    # beta = 0 leaves dp = (q2 - (q1 + q2) p) dt with an explicit solution
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.1, mu2=0.1, T=1.0, mode="alternating",
                          q1=2.0, q2=3.0)
    g = TimeGrid(0.0, 1.0, 20000)
    post = simulate_posterior(0.9, g, params, brownian_bundle(g, 1, 0))
    exact = 0.6 + (0.9 - 0.6) * np.exp(-5.0 * g.times)
    np.testing.assert_allclose(post.values[0], exact, atol=1e-4)


def test_posterior_is_a_martingale_under_p():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0)
    g = TimeGrid(0.0, 1.0, 200)
    post = simulate_posterior(0.4, g, params, brownian_bundle(g, 20000, 5))
    end = post.values[:, -1]
    assert abs(end.mean() - 0.4) < 4 * end.std() / np.sqrt(end.size)
    assert np.all((post.values > 0) & (post.values < 1))
    assert post.overshoot_count >= 0 and post.clamp_rate >= 0


def test_clamps_are_counted():
    params = MarketParams(r=0.0, sigma=0.05, mu1=1.0, mu2=0.0, T=1.0)
    g = TimeGrid(0.0, 1.0, 10)
    post = simulate_posterior(0.5, g, params, brownian_bundle(g, 500, 2))
    assert post.overshoot_count > 0
    assert post.clamp_count >= post.overshoot_count
    assert post.values.min() >= 1e-9 and post.values.max() <= 1 - 1e-9


def test_bad_inputs():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0)
    g = TimeGrid(0.0, 1.0, 10)
    b = brownian_bundle(g, 3, 0)
    with pytest.raises(ParameterError):
        simulate_posterior(1.0, g, params, b)
    with pytest.raises(ParameterError):
        simulate_posterior(0.5, g, params, b, measure="R")
    with pytest.raises(ParameterError):
        simulate_posterior(0.5, TimeGrid(0.0, 1.0, 11), params, b)


def test_measure_weight_has_unit_mean():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0)
    g = TimeGrid(0.0, 1.0, 100)
    b = brownian_bundle(g, 20000, 9)
    z = measure_weight(simulate_posterior(0.5, g, params, b), b, params).values[:, -1]
    assert abs(z.mean() - 1.0) < 4 * z.std() / np.sqrt(z.size)
    with pytest.raises(ParameterError):
        measure_weight(simulate_posterior(0.5, g, params, b, "Q"), b, params)


def test_tangent_matches_pathwise_difference():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=0.5)
    g = TimeGrid(0.0, 0.5, 2000)
    b = brownian_bundle(g, 200, 4)
    h = 1e-5
    up = simulate_posterior(0.5 + h, g, params, b, "Q").values[:, -1]
    dn = simulate_posterior(0.5 - h, g, params, b, "Q").values[:, -1]
    fd = (up - dn) / (2 * h)
    zeta = simulate_tangent(simulate_posterior(0.5, g, params, b, "Q"), b, params).values[:, -1]
    assert np.all(zeta > 0)
    np.testing.assert_allclose(zeta, fd, rtol=0.05, atol=1e-3)


def test_chain_transition_probability():
    q1, q2, t = 1.0, 3.0, 0.4
    g = TimeGrid(0.0, t, 4)
    ch = simulate_chain(g, q1, q2, 1, seed=11, n_paths=20000)
    assert set(np.unique(ch)) <= {1, 2}
    assert np.all(ch[:, 0] == 1)
    q = q1 + q2
    exact = q2 / q + q1 / q * np.exp(-q * t)
    frac = np.mean(ch[:, -1] == 1)
    assert abs(frac - exact) < 4 * np.sqrt(exact * (1 - exact) / 20000)


def test_chain_rejects_bad_rates():
    with pytest.raises(ParameterError):
        simulate_chain(TimeGrid(0.0, 1.0, 2), 0.0, 1.0, 1, seed=0)
