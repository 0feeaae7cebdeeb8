from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import oracles
from mvgame import ParameterError
from mvgame.cauchy import (
    CauchyTable,
    MCConfig,
    build_tables,
    closed_form_C_markov,
    closed_form_c_markov,
    constant_source,
    default_p_nodes,
    estimate_C,
    estimate_c,
    estimate_dc_dp,
    fd_dc_dp,
    jump_variance,
    load_or_build_tables,
    markov_Q,
    solve_cauchy_fd,
    solve_second_cauchy,
    source_term,
    table_cache_key,
)

MC = MCConfig(n_paths_c=4000, n_paths_dc=8000, n_paths_C=2000, dt=0.01, seed=5)


def test_oracle_frozen_values(fig1):
    # frozen quadrature values at t = 0 for the first figure's market
    params, _ = fig1
    H = [oracles.base_H(10.0, p, params) for p in (0.25, 0.5, 0.75)]
    G = [oracles.base_G(10.0, p, params) for p in (0.25, 0.5, 0.75)]
    np.testing.assert_allclose(H, [1.37084, 2.11819, 3.40933], rtol=2e-5)
    np.testing.assert_allclose(G, [2.41871, 3.71746, 7.44349], rtol=2e-5)


@pytest.mark.parametrize("p", [0.25, 0.5, 0.75])
def test_estimate_c_against_quadrature(fig1, p):
    params, c = fig1
    v, se = estimate_c(8.0, p, 2, params, c, MC)
    exact = c.kappa[2] * oracles.base_H(2.0, p, params)
    assert abs(v - exact) < 4 * se + 0.005 * exact


@pytest.mark.parametrize("p", [0.25, 0.75])
def test_dc_dp_estimators_against_quadrature(fig1, p):
    params, c = fig1
    exact = c.kappa[0] * oracles.base_G(2.0, p, params)
    v, se = estimate_dc_dp(8.0, p, 0, params, c, MC)
    assert abs(v - exact) < 4 * se + 0.01 * exact
    v2, se2 = fd_dc_dp(8.0, p, 0, params, c, MC)
    assert abs(v2 - exact) < 4 * se2 + 0.01 * exact


def test_terminal_values_are_zero(fig1):
    params, c = fig1
    assert estimate_c(10.0, 0.5, 0, params, c, MC) == (0.0, 0.0)
    assert estimate_dc_dp(10.0, 0.5, 0, params, c, MC) == (0.0, 0.0)


def test_full_interval_fd_against_quadrature(fig1):
    params, c = fig1
    tab = solve_cauchy_fd(0, params, c, n=None, n_space=400, n_time=400, t_out=[0.0, 5.0, 8.0])
    for t in (0.0, 5.0, 8.0):
        for p in (0.25, 0.5, 0.75):
            exact = c.kappa[0] * oracles.base_H(10.0 - t, p, params)
            assert tab.interp("c", t, p, 0, warn=False) == pytest.approx(exact, rel=0.01)


def test_nested_domains_increase(fig1):
    params, c = fig1
    t_out = [0.0, 5.0]
    tabs = [solve_cauchy_fd(0, params, c, n=n, n_space=200, n_time=200, t_out=t_out)
            for n in (4, 8, 16)]
    for lo, hi in zip(tabs[:-1], tabs[1:]):
        for j in range(2):
            inner = np.interp(lo.p, hi.p, hi.c[0, j])
            assert np.all(lo.c[0, j] <= inner + 1e-9)
    with pytest.raises(ParameterError):
        solve_cauchy_fd(0, params, c, n=1)


def test_derived_source_identity(mixed):
    # the derived source collapses to (kappa + w kappa_bar) m (m - h) - (gamma/2) kappa^2 m^2
    params, c = mixed
    rng = np.random.default_rng(0)
    p = rng.uniform(0.01, 0.99, 50)
    h = rng.normal(0, 0.3, 50)
    m = params.risk_premium(p)
    for i in range(c.N):
        lead = c.kappa[i] + c.mean_gap_weight[i] * c.kappa_bar
        want = lead * m * (m - h) - 0.5 * c.gamma[i] * c.kappa[i] ** 2 * m**2
        np.testing.assert_allclose(source_term(p, h, i, params, c), want, rtol=1e-12, atol=1e-14)


def test_constant_source(mixed):
    params, c = mixed
    for i in range(c.N):
        m = (0.15 - 0.03) / 0.2
        want = (c.kappa[i] + c.mean_gap_weight[i] * c.kappa_bar) * m**2 - 0.5 * c.gamma[i] * (c.kappa[i] * m) ** 2
        assert constant_source(i, params, c, 0.15) == pytest.approx(want, rel=1e-12)


def test_published_variants_coincide_without_mean_gap(fig1, mixed):
    params, c = fig1
    assert constant_source(3, params, c, 0.2, "paper_plus") == constant_source(3, params, c, 0.2, "paper_minus")
    params, c = mixed
    assert constant_source(0, params, c, 0.15, "paper_plus") != constant_source(0, params, c, 0.15, "paper_minus")
    with pytest.raises(ParameterError):
        constant_source(0, params, c, 0.15, "other")


def _markov_ode(params, c, i):
    """Backward ODEs for c_i(t, m), C_i(t, m) and the jump variance."""
    q = (params.q1, params.q2)
    f = [c.kappa[i] * ((mu - params.r) / params.sigma) ** 2 for mu in (params.mu1, params.mu2)]
    Q = markov_Q(i, params, c)

    def rhs(s, y):  # s = time to maturity
        cc, CC, vv = y[0:2], y[2:4], y[4:6]
        out = np.empty(6)
        for m in range(2):
            o = 1 - m
            out[m] = f[m] + q[m] * (cc[o] - cc[m])
            out[2 + m] = Q[m] + q[m] * (CC[o] - CC[m])
            out[4 + m] = q[m] * (cc[o] - cc[m]) ** 2 + q[m] * (vv[o] - vv[m])
        return out

    return solve_ivp(rhs, (0, params.T), np.zeros(6), rtol=1e-10, atol=1e-12, dense_output=True)


def test_markov_closed_forms_against_ode():
    from mvgame import InvestorParams, MarketParams, compute_coefficients

    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=3.0, mode="alternating",
                          q1=1.5, q2=0.7)
    c = compute_coefficients([InvestorParams(1.0, 0.6, 0.6), InvestorParams(2.0, 0.3, 0.3)])
    sol = _markov_ode(params, c, 1)
    for t in (0.0, 1.0, 2.5):
        y = sol.sol(params.T - t)
        for m in (1, 2):
            assert closed_form_c_markov(t, m, 1, params, c) == pytest.approx(y[m - 1], rel=1e-7)
            assert closed_form_C_markov(t, m, 1, params, c) == pytest.approx(y[1 + m], rel=1e-7)
            assert jump_variance(t, m, 1, params, c) == pytest.approx(y[3 + m], rel=1e-6, abs=1e-12)
            with_jv = closed_form_C_markov(t, m, 1, params, c, include_jump_variance=True)
            assert with_jv == pytest.approx(y[1 + m] - 0.5 * c.gamma[1] * y[3 + m], rel=1e-6)


def test_markov_needs_alternating(fig1):
    params, c = fig1
    with pytest.raises(ParameterError):
        closed_form_c_markov(0.0, 1, 0, params, c)


@pytest.fixture(scope="module")
def small_table():
    from mvgame import InvestorParams, MarketParams, compute_coefficients

    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=2.0)
    c = compute_coefficients([InvestorParams(8.0, 0.5, 0.5), InvestorParams(9.0, 0.5, 0.5)])
    t = np.linspace(0.0, 2.0, 9)
    p = default_p_nodes(21)
    return params, c, build_tables(params, c, t, p, MC)


def test_table_against_quadrature(small_table):
    params, c, tab = small_table
    for t in (0.0, 1.0):
        for p in (0.25, 0.5, 0.75):
            H = oracles.base_H(2.0 - t, p, params)
            G = oracles.base_G(2.0 - t, p, params)
            assert tab.interp("c", t, p, 0) == pytest.approx(c.kappa[0] * H, rel=0.02)
            assert tab.interp("dc_dp", t, p, 1) == pytest.approx(c.kappa[1] * G, rel=0.03)
            assert tab.interp("C", t, p, 0) == pytest.approx(oracles.derived_C(2.0 - t, p, 0, params, c), rel=0.03, abs=5e-4)
    assert np.all(tab.c[:, -1] == 0) and np.all(tab.dc_dp[:, -1] == 0)


def test_table_interp_hits_nodes(small_table):
    _, _, tab = small_table
    assert tab.interp("c", tab.t[3], tab.p[7], 1) == pytest.approx(tab.c[1, 3, 7], rel=1e-12)
    np.testing.assert_allclose(tab.interp("hedge", tab.t[2], tab.p[5]),
                               tab.beta_scale * tab.p[5] * (1 - tab.p[5]) * tab.dc_dp[:, 2, 5], rtol=1e-12)
    with pytest.raises(ParameterError):
        tab.interp("nope", 0.0, 0.5)


def test_table_csv_round_trip(small_table, tmp_path):
    _, _, tab = small_table
    tab.to_csv(tmp_path / "t.csv")
    back = CauchyTable.from_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.c, tab.c)
    np.testing.assert_array_equal(back.dc_dp, tab.dc_dp)
    np.testing.assert_array_equal(back.C, tab.C)
    assert back.beta_scale == tab.beta_scale


def test_direct_C_agrees_with_fd(small_table):
    params, c, tab = small_table
    v, se = estimate_C(1.0, np.array([0.3, 0.7]), 1, params, c, tab, MC)
    fd = [tab.interp("C", 1.0, p, 1) for p in (0.3, 0.7)]
    np.testing.assert_array_less(np.abs(v - fd), 4 * se + 2e-4)


def test_second_problem_mc_fill(small_table):
    params, c, tab = small_table
    import copy

    t2 = copy.deepcopy(tab)
    solve_second_cauchy(params, c, t2, method="mc", mc=MCConfig(n_paths_C=500, dt=0.02, seed=2),
                        investors=[0])
    j = 4
    diff = np.abs(t2.C[0, j] - tab.C[0, j])
    assert np.all(diff < 5 * t2.se_C[0, j] + 1e-3)


def test_cache_key_and_reuse(tmp_path):
    from mvgame import InvestorParams, MarketParams, compute_coefficients

    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=1.0)
    c = compute_coefficients([InvestorParams(5.0, 0.5, 0.5)])
    t, p = np.linspace(0, 1, 3), default_p_nodes(9)
    mc = MCConfig(n_paths_c=100, n_paths_dc=100, n_paths_C=50, dt=0.05)
    k1 = table_cache_key(params, c, t, p, mc, "fd", "derived")
    assert k1 == table_cache_key(params, c, t, p, MCConfig(**{**mc.__dict__, "threads": 4}), "fd", "derived")
    assert k1 != table_cache_key(params, c, t, p, mc, "fd", "paper_plus")
    a, path, hit = load_or_build_tables(params, c, tmp_path, t, p, mc)
    assert not hit and path.exists()
    b, _, hit = load_or_build_tables(params, c, tmp_path, t, p, mc)
    assert hit
    np.testing.assert_array_equal(a.C, b.C)


def test_mc_config_validation():
    with pytest.raises(ParameterError):
        MCConfig(n_paths_c=0)
    with pytest.raises(ParameterError):
        MCConfig(dt=0.0)
