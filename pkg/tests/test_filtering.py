from __future__ import annotations

import numpy as np
import pytest
from scipy.special import logit

from mvgame import MarketParams, ParameterError, TimeGrid
from mvgame.filtering import posterior_closed_form, posterior_from_observations, simulate_truth

PARAMS = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0)


def test_closed_form_log_odds_by_hand():
    g = TimeGrid(0.0, 0.2, 2)
    lr = np.array([[0.03, -0.01]])
    post = posterior_closed_form(lr, 0.3, PARAMS, g)
    s2 = 0.01
    a1, a2 = 0.2 - s2 / 2, 0.02 - s2 / 2
    Y = np.array([0.0, 0.03, 0.02])
    L = logit(0.3) + (a1 - a2) / s2 * Y - (a1**2 - a2**2) / (2 * s2) * g.times
    np.testing.assert_allclose(post.log_odds[0], L, rtol=1e-12)
    np.testing.assert_allclose(post.values[0], 1 / (1 + np.exp(-L)), rtol=1e-12)


def test_euler_filter_converges_to_closed_form():
    devs = []
    for n in (500, 4000):
        g = TimeGrid(0.0, 1.0, n)
        truth = simulate_truth(PARAMS, g, seed=3, n_paths=50)
        exact = posterior_closed_form(truth.log_returns, 0.5, PARAMS, g)
        euler = posterior_from_observations(None, 0.5, PARAMS, g, log_returns=truth.log_returns)
        devs.append(np.max(np.abs(exact.values - euler.values)))
    assert devs[1] < devs[0]
    assert devs[1] < 0.01


def test_stock_path_and_log_returns_agree():
    g = TimeGrid(0.0, 1.0, 100)
    truth = simulate_truth(PARAMS, g, seed=1)
    a = posterior_from_observations(truth.stock, 0.5, PARAMS, g)
    b = posterior_from_observations(None, 0.5, PARAMS, g, log_returns=truth.log_returns)
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)


def test_posterior_mean_equals_prior_under_bayes_mixture():
    # draw the truth from the prior; the filter is then a martingale
    g = TimeGrid(0.0, 1.0, 200)
    up = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0, state=1)
    dn = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0, state=2)
    n = 20000
    k = int(0.3 * n)
    ends = np.concatenate([
        posterior_closed_form(simulate_truth(up, g, 1, n_paths=k).log_returns, 0.3, up, g).values[:, -1],
        posterior_closed_form(simulate_truth(dn, g, 2, n_paths=n - k).log_returns, 0.3, dn, g).values[:, -1],
    ])
    assert abs(ends.mean() - 0.3) < 4 * ends.std() / np.sqrt(n)


def test_innovations_are_standard_increments_when_filter_is_right():
    g = TimeGrid(0.0, 1.0, 1000)
    truth = simulate_truth(PARAMS, g, seed=8, n_paths=20)
    post = posterior_closed_form(truth.log_returns, 1 - 1e-8, PARAMS, g)
    np.testing.assert_allclose(post.innovations, truth.dW, atol=1e-6)


def test_alternating_has_no_closed_form():
    alt = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0, mode="alternating", q1=1, q2=1)
    g = TimeGrid(0.0, 1.0, 10)
    truth = simulate_truth(alt, g, seed=0)
    assert truth.chain is not None and truth.mu is None
    with pytest.raises(ParameterError):
        posterior_closed_form(truth.log_returns, 0.5, alt, g)


@pytest.mark.parametrize("prior", [0.0, 1.0, -0.2])
def test_prior_validated(prior):
    g = TimeGrid(0.0, 1.0, 10)
    with pytest.raises(ParameterError):
        posterior_from_observations(np.ones(11), prior, PARAMS, g)


def test_stock_path_validated():
    g = TimeGrid(0.0, 1.0, 2)
    with pytest.raises(ParameterError):
        posterior_from_observations([1.0, -1.0, 1.0], 0.5, PARAMS, g)
    with pytest.raises(ParameterError):
        posterior_from_observations([1.0, 1.0], 0.5, PARAMS, g)
