from __future__ import annotations

import math

import numpy as np
import pytest

from mvgame import InvestorParams, MarketParams, ParameterError, compute_coefficients
from mvgame.cauchy import MCConfig, build_tables, constant_source, default_p_nodes
from mvgame.equilibrium import (
    ObjectiveConfig,
    Profile,
    StrategyKind,
    aggregate_closed_form,
    aggregate_strategy,
    estimate_objective,
    intra_equilibrium_test,
    others_mean,
    profile_values,
    strategy_terms,
    strategy_value,
    value_function,
)


def test_full_info_constant_at_maturity(fig1):
    params, c = fig1
    pi = strategy_value(StrategyKind.FULL_INFO_CONSTANT, 10.0, None, 0, c, params)
    # (kappa_1 + kappa_bar) (mu - r) / sigma^2 with equal weights
    want = (c.kappa[0] + c.kappa_bar) * 0.15 / 0.01
    assert pi == pytest.approx(want, rel=1e-12)
    assert pi == pytest.approx(3.608, abs=5e-3)


def test_discount_factorises(fig1):
    params, c = fig1
    a = profile_values(StrategyKind.FULL_INFO_CONSTANT, 4.0, None, c, params)
    b = profile_values(StrategyKind.FULL_INFO_CONSTANT, 10.0, None, c, params)
    np.testing.assert_allclose(a, b * math.exp(-0.05 * 6.0), rtol=1e-12)


def test_merton_control(fig1):
    params, c = fig1
    pi = profile_values(StrategyKind.MERTON, 10.0, None, c, params)
    np.testing.assert_allclose(pi, 0.15 / (0.01 * c.gamma), rtol=1e-12)


def test_markov_uses_chain_state(fig2):
    params, c = fig2
    m = np.array([1, 2, 2])
    pi = profile_values(StrategyKind.FULL_INFO_MARKOV, 10.0, m, c, params)
    assert pi.shape == (10, 3)
    np.testing.assert_allclose(pi[:, 0], c.effective_kappa * 0.15 / 0.01)
    np.testing.assert_allclose(pi[:, 1], c.effective_kappa * -0.03 / 0.01)


def test_aggregate_matches_mean_of_profile(fig1, fig2):
    params, c = fig1
    v = profile_values(StrategyKind.FULL_INFO_CONSTANT, 3.0, None, c, params)
    assert aggregate_strategy(v) == pytest.approx(
        aggregate_closed_form(StrategyKind.FULL_INFO_CONSTANT, 3.0, None, c, params), rel=1e-12)
    params, c = fig2
    v = profile_values(StrategyKind.FULL_INFO_MARKOV, 3.0, 2, c, params)
    assert aggregate_strategy(v) == pytest.approx(
        aggregate_closed_form(StrategyKind.FULL_INFO_MARKOV, 3.0, 2, c, params), rel=1e-12)
    with pytest.raises(ParameterError):
        aggregate_strategy([])


def test_others_mean():
    assert others_mean([1.0, 2.0, 3.0, 6.0], 1) == pytest.approx(10.0 / 4)


@pytest.fixture(scope="module")
def small_game():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=2.0)
    c = compute_coefficients([InvestorParams(8.0, 0.5, 0.5), InvestorParams(6.0, 0.3, 0.7),
                              InvestorParams(9.0, 0.5, 0.4)])
    mc = MCConfig(n_paths_c=4000, n_paths_dc=8000, n_paths_C=1000, dt=0.01, seed=3)
    tab = build_tables(params, c, np.linspace(0, 2, 11), default_p_nodes(25), mc)
    return params, c, tab


def test_partial_first_term_is_full_info_formula_in_theta(small_game):
    params, c, tab = small_game
    p = np.array([0.2, 0.6])
    first, second = strategy_terms(StrategyKind.PARTIAL_INFO, 1.0, p, c, params, tab)
    disc = math.exp(-0.05 * 1.0)
    np.testing.assert_allclose(first, disc * c.effective_kappa[:, None] * (params.theta(p) - 0.05) / 0.01)
    only = profile_values(StrategyKind.PARTIAL_INFO_FIRST_TERM, 1.0, p, c, params)
    np.testing.assert_allclose(only, first)
    hedge = tab.interp("hedge", 1.0, p)
    want = disc * (hedge + c.relative_weight[:, None] * hedge.mean(axis=0)) / 0.1
    np.testing.assert_allclose(second, want, rtol=1e-12)
    # the hedge of investor j is kappa_j times a common slope
    np.testing.assert_allclose(hedge / c.kappa[:, None], np.broadcast_to(hedge[0] / c.kappa[0], hedge.shape))


def test_partial_aggregate(small_game):
    params, c, tab = small_game
    v = profile_values(StrategyKind.PARTIAL_INFO, 0.5, 0.4, c, params, tab)
    assert aggregate_strategy(v) == pytest.approx(
        aggregate_closed_form(StrategyKind.PARTIAL_INFO, 0.5, 0.4, c, params, tab), rel=1e-10)


def test_time_and_state_arrays_broadcast(small_game):
    params, c, tab = small_game
    t = np.array([0.0, 0.5, 1.9])
    p = np.array([0.3, 0.5, 0.7])
    v = profile_values(StrategyKind.PARTIAL_INFO, t, p, c, params, tab)
    assert v.shape == (3, 3)
    for k in range(3):
        np.testing.assert_allclose(v[:, k], profile_values(StrategyKind.PARTIAL_INFO, t[k], p[k], c, params, tab))


def test_state_validation(fig1, small_game):
    params, c = fig1
    with pytest.raises(ParameterError):
        profile_values(StrategyKind.PARTIAL_INFO, 1.0, 0.5, c, params)
    with pytest.raises(ParameterError):
        profile_values(StrategyKind.PARTIAL_INFO_FIRST_TERM, 1.0, 1.0, c, params)
    with pytest.raises(ParameterError):
        profile_values(StrategyKind.FULL_INFO_MARKOV, 1.0, 1, c, params)
    with pytest.raises(ParameterError):
        profile_values(StrategyKind.FULL_INFO_CONSTANT, 1.0, 0.5, c, params)
    with pytest.raises(ParameterError):
        strategy_value(StrategyKind.FULL_INFO_CONSTANT, 11.0, None, 0, c, params)


def test_value_function_full_info_closed_form(fig1):
    params, c = fig1
    x = np.linspace(1.0, 2.0, 10)
    v = value_function(StrategyKind.FULL_INFO_CONSTANT, 4.0, x, None, 2, c, params)
    g = math.exp(0.05 * 6.0)
    base = (1 - 0.05) * g * x[2] - 0.5 * g * (x.sum() - x[2]) / 10
    assert v == pytest.approx(base + 6.0 * constant_source(2, params, c, 0.2), rel=1e-12)


def test_value_matches_objective_full_info(mixed):
    params, c = mixed
    x = np.array([1.0, 0.5, 2.0])
    prof = Profile(StrategyKind.FULL_INFO_CONSTANT, c, params)
    cfg = ObjectiveConfig(n_paths=20000, dt=0.01, seed=1)
    for i in range(3):
        est = estimate_objective(prof, i, 1.0, x, None, cfg)
        v = value_function(StrategyKind.FULL_INFO_CONSTANT, 1.0, x, None, i, c, params)
        assert abs(est.J - v) < 4 * est.se_J


def test_value_matches_objective_markov():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0, mode="alternating",
                          q1=2.0, q2=2.0)
    c = compute_coefficients([InvestorParams(1.0, 0.6, 0.6), InvestorParams(2.0, 0.6, 0.6)])
    x = np.array([1.0, 1.0])
    prof = Profile(StrategyKind.FULL_INFO_MARKOV, c, params)
    est = estimate_objective(prof, 0, 0.0, x, 1, ObjectiveConfig(n_paths=40000, dt=0.005, seed=2))
    v = value_function(StrategyKind.FULL_INFO_MARKOV, 0.0, x, 1, 0, c, params)
    assert abs(est.J - v) < 4 * est.se_J


def test_value_matches_objective_partial(small_game):
    params, c, tab = small_game
    x = np.array([1.0, 1.0, 1.0])
    prof = Profile(StrategyKind.PARTIAL_INFO, c, params, tab)
    est = estimate_objective(prof, 1, 1.0, x, 0.5, ObjectiveConfig(n_paths=20000, dt=0.005, seed=4))
    v = value_function(StrategyKind.PARTIAL_INFO, 1.0, x, 0.5, 1, c, params, tab)
    assert abs(est.J - v) < 4 * est.se_J + 1e-3


def test_value_function_needs_C(small_game):
    params, c, tab = small_game
    with pytest.raises(ParameterError):
        value_function(StrategyKind.PARTIAL_INFO, 1.0, np.ones(3), 0.5, 0, c, params)
    v = value_function(StrategyKind.PARTIAL_INFO, 1.0, np.ones(3), 0.5, 0, c, params, C_value=0.25)
    g = math.exp(0.05)
    assert v == pytest.approx((1 - 0.5 / 3) * g - 0.5 * g * 2 / 3 + 0.25)


def test_zero_perturbation_changes_nothing(mixed):
    params, c = mixed
    prof = Profile(StrategyKind.FULL_INFO_CONSTANT, c, params)
    rep = intra_equilibrium_test(prof, 0, 0.5, np.ones(3), None, h_grid=(0.1,), delta_grid=(0.0,),
                                 cfg=ObjectiveConfig(n_paths=2000, seed=3))
    assert rep.results[0].improvement == 0.0
    assert rep.passed


def test_equilibrium_survives_perturbations(mixed):
    params, c = mixed
    prof = Profile(StrategyKind.FULL_INFO_CONSTANT, c, params)
    rep = intra_equilibrium_test(prof, 1, 0.5, np.ones(3), None, cfg=ObjectiveConfig(n_paths=20000, seed=5))
    assert rep.passed, rep.reason


def test_merton_profile_is_not_an_equilibrium(fig1):
    params, c = fig1
    prof = Profile(StrategyKind.MERTON, c, params)
    rep = intra_equilibrium_test(prof, 0, 8.0, np.ones(10), None, h_grid=(0.5, 1.0),
                                 delta_grid=(1.0, 2.0), cfg=ObjectiveConfig(n_paths=20000, seed=6))
    assert not rep.passed
    assert rep.significant()


def test_objective_config_validation():
    with pytest.raises(ParameterError):
        ObjectiveConfig(n_paths=10, n_batches=50)
    with pytest.raises(ParameterError):
        ObjectiveConfig(dt=-1)
