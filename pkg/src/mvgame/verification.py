"""Acceptance checks, shared by the test suite and ``mvgame verify``.

Each ``criterion_k`` returns a :class:`CriterionResult` with the gate verdict
and the numbers behind it. Some checks report supplementary metrics that are
not part of the gate; they are listed under ``metrics`` only.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field

import numpy as np

from mvgame.cauchy import (
    MCConfig,
    closed_form_C_markov,
    closed_form_c_markov,
    estimate_c,
    estimate_dc_dp,
    fd_dc_dp,
    load_or_build_tables,
    markov_Q,
    solve_cauchy_fd,
    solve_second_cauchy,
)
from mvgame.core_model import InvestorParams, MarketParams, compute_coefficients
from mvgame.equilibrium import (
    ObjectiveConfig,
    Profile,
    StrategyKind,
    estimate_objective,
    intra_equilibrium_test,
    strategy_value,
    value_function,
)
from mvgame.filtering import posterior_closed_form, posterior_from_observations, simulate_truth
from mvgame.game_sim import Scenario, loss_distribution
from mvgame.stochastic_engine import TimeGrid, brownian_bundle, simulate_chain, simulate_posterior

PROBE_T = (0.0, 5.0, 8.0)
PROBE_P = (0.25, 0.5, 0.75)
FIGURE_SEED = 2024


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    notes: str = ""
    elapsed: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        extra = f" | {self.notes}" if self.notes else ""
        return f"[{verdict}] criterion {self.number:>2}: {self.title} ({self.elapsed:.0f}s){extra}"

    def to_dict(self) -> dict:
        return {"criterion": self.number, "title": self.title, "passed": bool(self.passed),
                "metrics": _jsonable(self.metrics), "notes": self.notes,
                "elapsed_s": round(self.elapsed, 2)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def figure_1_setup(mu1: float = 0.2, mu2: float = 0.02):
    """Constant drift ``mu = mu1``: ``r=0.05, sigma=0.1, T=10``, ten
    investors with ``gamma_i = 8 + 0.1 i`` and ``lambda = 0.5``."""
    params = MarketParams(r=0.05, sigma=0.1, mu1=mu1, mu2=mu2, T=10.0, mode="constant", state=1)
    investors = [InvestorParams(8 + 0.1 * i, 0.5, 0.5) for i in range(1, 11)]
    return params, investors, compute_coefficients(investors)


def figure_2_setup():
    """Drift alternating between 0.2 and 0.02 with ``q1 = q2 = 10``, ten
    investors with ``gamma_i = 0.1 i`` and ``lambda = 0.9``."""
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=10.0, mode="alternating",
                          state=1, q1=10.0, q2=10.0)
    investors = [InvestorParams(0.1 * i, 0.9, 0.9) for i in range(1, 11)]
    return params, investors, compute_coefficients(investors)


class Context:
    """Shared state across criteria: cached Cauchy tables."""

    def __init__(self, cache_dir=None, mc: MCConfig | None = None):
        self.cache_dir = cache_dir
        self.mc = mc or MCConfig()
        self._tables = {}

    def table(self, which: int):
        if which not in self._tables:
            params, _, coeffs = figure_1_setup() if which == 1 else figure_2_setup()
            self._tables[which] = load_or_build_tables(params, coeffs, self.cache_dir,
                                                       mc=self.mc)[0]
        return self._tables[which]


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.elapsed = time.perf_counter() - t0
        budget = res.metrics.get("runtime_budget_s")
        if budget is not None:
            res.metrics["within_runtime_budget"] = res.elapsed < budget
            if res.elapsed >= budget:
                res.passed = False
                res.notes += f" runtime {res.elapsed:.0f}s over budget {budget}s"
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------
# filter
# ---------------------------------------------------------------------------


@_timed
def criterion_1(ctx: Context | None = None, n_paths: int = 1000, T: float = 50.0,
                dt: float = 0.01, seed: int = 101) -> CriterionResult:
    """Learning: with ``mu = mu1`` the posterior at ``T = 50`` exceeds 0.99
    in at least 95% of paths."""
    params, _, _ = figure_1_setup()
    params = dataclasses.replace(params, T=T)
    grid = TimeGrid(0.0, T, int(round(T / dt)))
    truth = simulate_truth(params, grid, seed, n_paths=n_paths)
    post = posterior_closed_form(truth.log_returns, 0.5, params, grid)
    frac = float(np.mean(post.values[:, -1] > 0.99))
    return CriterionResult(1, "filter convergence", frac >= 0.95,
                           {"fraction_above_0.99": frac, "n_paths": n_paths,
                            "runtime_budget_s": 60},
                           f"fraction above 0.99 = {frac:.3f} (need >= 0.95)")


@_timed
def criterion_2(ctx: Context | None = None, n_paths: int = 10_000, dt: float = 1e-3,
                chunk: int = 2000, seed: int = 202) -> CriterionResult:
    """Clamp rate of the Euler filter below 0.1% of steps in both modes."""
    metrics = {"runtime_budget_s": 120}
    ok = True
    for name, setup in (("constant", figure_1_setup), ("alternating", figure_2_setup)):
        params = setup()[0]
        grid = TimeGrid(0.0, params.T, int(round(params.T / dt)))
        clamps = overshoots = steps = 0
        for r in range(int(math.ceil(n_paths / chunk))):
            m = min(chunk, n_paths - r * chunk)
            bundle = brownian_bundle(grid, m, seed, r)
            post = simulate_posterior(0.5, grid, params, bundle)
            clamps += post.clamp_count
            overshoots += post.overshoot_count
            steps += post.innovations.size
        rate = clamps / steps
        metrics[f"{name}_clamp_rate"] = rate
        metrics[f"{name}_overshoot_rate"] = overshoots / steps
        ok &= rate < 1e-3
    notes = ", ".join(f"{k}={metrics[k]:.2e}" for k in metrics if k.endswith("clamp_rate"))
    return CriterionResult(2, "posterior clamp rate", ok, metrics, notes + " (need < 1e-3)")


def _filter_deviation(params, dt, n_paths, seed, T=1.0, coarsen=1):
    grid_fine = TimeGrid(0.0, T, int(round(T / dt)))
    truth = simulate_truth(params, grid_fine, seed, n_paths=n_paths)
    lr = truth.log_returns
    if coarsen > 1:
        lr = lr.reshape(n_paths, -1, coarsen).sum(axis=2)
    grid = TimeGrid(0.0, T, lr.shape[1])
    exact = posterior_closed_form(lr, 0.5, params, grid)
    euler = posterior_from_observations(None, 0.5, params, grid, log_returns=lr)
    return float(np.max(np.abs(exact.values - euler.values)))


@_timed
def criterion_3(ctx: Context | None = None, n_paths: int = 100, seed: int = 303) -> CriterionResult:
    """Closed-form vs Euler filter on the same observations: max deviation
    at ``dt = 1e-4`` is at most 0.01 and shrinks when ``dt`` is halved from
    ``2e-4``. Both grids observe one underlying path."""
    params = figure_1_setup()[0]
    d_fine = _filter_deviation(params, 1e-4, n_paths, seed)
    d_coarse = _filter_deviation(params, 1e-4, n_paths, seed, coarsen=2)
    ok = d_fine <= 1e-2 and d_fine < d_coarse
    return CriterionResult(3, "closed-form vs SDE filter", ok,
                           {"max_dev_dt_1e-4": d_fine, "max_dev_dt_2e-4": d_coarse,
                            "n_paths": n_paths},
                           f"max dev {d_fine:.4f} at dt=1e-4, {d_coarse:.4f} at dt=2e-4")


# ---------------------------------------------------------------------------
# Cauchy problems
# ---------------------------------------------------------------------------


def _stopped_mc_c(t, p_list, i, params, coeffs, n, n_paths=4000, dt=1e-3, seed=404):
    """``c_i`` of the truncated problem: the Q-path integral of ``kappa m^2``
    stopped when the filter leaves ``(1/n, 1 - 1/n)`` (constant drift only,
    stepped exactly in log-odds, exits checked at grid times)."""
    from scipy.special import expit, logit

    from mvgame.stochastic_engine import make_rng

    k = (params.mu1 - params.mu2) / params.sigma
    m0 = (params.mu2 - params.r) / params.sigma
    a = -k * (m0 + 0.5 * k)
    steps = int(round((params.T - t) / dt))
    rng = make_rng(seed, 0, "stopped_mc")
    L = np.repeat(logit(np.asarray(p_list, dtype=float))[:, None], n_paths, axis=1)
    alive = np.ones_like(L, dtype=bool)
    acc = np.zeros_like(L)
    edge = logit(1.0 - 1.0 / n)
    for _ in range(steps):
        m = k * expit(L) + m0
        acc += np.where(alive, m * m * dt, 0.0)
        L += a * dt + k * math.sqrt(dt) * rng.standard_normal(n_paths)
        alive &= np.abs(L) < edge
    vals = coeffs.kappa[i] * acc
    return vals.mean(axis=1), vals.std(axis=1, ddof=1) / math.sqrt(n_paths)


def _fd_at(table, i, t, p):
    return float(table.interp("c", t, p, i, warn=False))


@_timed
def criterion_4(ctx: Context | None = None, mc: MCConfig = MCConfig(), i: int = 0,
                domains=(8, 16, 32, 64)) -> CriterionResult:
    """MC of ``c_i`` vs nested-domain FD at ``n = 64`` within 3% at 9 probes,
    and FD monotonicity in ``n``.

    The truncated problem differs from the full one by a boundary layer;
    supplementary metrics compare MC with the full-interval FD solution.
    """
    params, _, coeffs = figure_1_setup()
    t_out = np.array(PROBE_T)
    fds = {n: solve_cauchy_fd(i, params, coeffs, n=n, t_out=t_out) for n in domains}
    full = solve_cauchy_fd(i, params, coeffs, n=None, t_out=t_out)
    rel64, rel_full, rows = [], [], []
    for t in PROBE_T:
        for p in PROBE_P:
            v, se = estimate_c(t, p, i, params, coeffs, mc)
            f64 = _fd_at(fds[domains[-1]], i, t, p)
            ff = _fd_at(full, i, t, p)
            rel64.append(abs(v - f64) / abs(f64))
            rel_full.append(abs(v - ff) / abs(ff))
            rows.append({"t": t, "p": p, "mc": v, "se": se, "fd_n64": f64, "fd_full": ff})
    mono_viol = 0.0
    for n_lo, n_hi in zip(domains[:-1], domains[1:]):
        lo, hi = fds[n_lo], fds[n_hi]
        for j in range(len(t_out)):
            hi_on_lo = np.interp(lo.p, hi.p, hi.c[i, j])
            mono_viol = max(mono_viol, float(np.max(lo.c[i, j] - hi_on_lo)))
    monotone = mono_viol <= 1e-9
    cross = max(rel64) <= 0.03
    # supplementary: the truncated problem itself, by a stopped simulation
    stop_rel = []
    for t in PROBE_T:
        sv, _ = _stopped_mc_c(t, PROBE_P, i, params, coeffs, domains[-1])
        for p, v in zip(PROBE_P, sv):
            f64 = _fd_at(fds[domains[-1]], i, t, p)
            stop_rel.append(abs(v - f64) / abs(f64))
    metrics = {"max_rel_mc_vs_fd_n64": max(rel64), "max_rel_mc_vs_fd_full": max(rel_full),
               "max_rel_stopped_mc_vs_fd_n64": max(stop_rel),
               "monotonicity_max_violation": mono_viol, "probes": rows,
               "runtime_budget_s": 600}
    notes = (f"MC vs FD(n=64) max rel {max(rel64):.1%} (need <= 3%); "
             f"monotone={monotone}; MC vs full-interval FD {max(rel_full):.2%}; "
             f"stopped MC vs FD(n=64) {max(stop_rel):.2%}")
    return CriterionResult(4, "Cauchy cross-oracle", cross and monotone, metrics, notes)


@_timed
def criterion_5(ctx: Context | None = None, mc: MCConfig = MCConfig(), i: int = 0) -> CriterionResult:
    """Tangent-process slope vs CRN finite difference within
    ``max(3 joint SE, 2% rel)``; exactly 0 when ``mu1 = mu2``."""
    params, _, coeffs = figure_1_setup()
    worst, rows, ok = 0.0, [], True
    for t in PROBE_T:
        for p in PROBE_P:
            z, zse = estimate_dc_dp(t, p, i, params, coeffs, mc)
            f, fse = fd_dc_dp(t, p, i, params, coeffs, mc)
            tol = max(3 * math.hypot(zse, fse), 0.02 * abs(f))
            ok &= abs(z - f) <= tol
            worst = max(worst, abs(z - f) / tol)
            rows.append({"t": t, "p": p, "zeta": z, "se_zeta": zse, "fd": f, "se_fd": fse})
    flat, _, flat_coeffs = figure_1_setup(mu1=0.1, mu2=0.1)
    zeros = [estimate_dc_dp(t, p, i, flat, flat_coeffs, mc)[0] for t in PROBE_T for p in PROBE_P]
    zero_ok = all(v == 0.0 for v in zeros)
    return CriterionResult(5, "derivative representation", bool(ok and zero_ok),
                           {"worst_ratio_to_tolerance": worst, "probes": rows,
                            "zero_when_equal_drifts": zero_ok},
                           f"worst |diff|/tol = {worst:.2f}; zero for mu1=mu2: {zero_ok}")


def _chain_integral(f1, f2, t, m, params, n_paths, dt, seed):
    grid = TimeGrid(t, params.T, int(round((params.T - t) / dt)))
    states = simulate_chain(grid, params.q1, params.q2, m, seed, n_paths=n_paths)
    vals = np.where(states == 1, f1, f2)
    integ = (vals[:, 1:] + vals[:, :-1]).sum(axis=1) * 0.5 * grid.dt
    return float(integ.mean()), float(integ.std(ddof=1) / math.sqrt(n_paths))


@_timed
def criterion_6(ctx: Context | None = None, n_paths: int = 4000, dt: float = 1e-3,
                seed: int = 606, investors=(0, 9), objective_check: bool = True) -> CriterionResult:
    """Regime-switching closed forms of ``c_i`` and ``C_i`` vs brute-force
    chain Monte Carlo of the same integrals, within 3 SE."""
    params, _, coeffs = figure_2_setup()
    rows, ok, worst = [], True, 0.0
    for i in investors:
        k = coeffs.kappa[i]
        f1 = k * ((params.mu1 - params.r) / params.sigma) ** 2
        f2 = k * ((params.mu2 - params.r) / params.sigma) ** 2
        Q1, Q2 = markov_Q(i, params, coeffs)
        for t in (0.0, 5.0):
            for m in (1, 2):
                c_mc, c_se = _chain_integral(f1, f2, t, m, params, n_paths, dt, seed)
                C_mc, C_se = _chain_integral(Q1, Q2, t, m, params, n_paths, dt, seed)
                c_cf = float(closed_form_c_markov(t, m, i, params, coeffs))
                C_cf = float(closed_form_C_markov(t, m, i, params, coeffs))
                zc, zC = abs(c_mc - c_cf) / c_se, abs(C_mc - C_cf) / C_se
                worst = max(worst, zc, zC)
                ok &= zc <= 3 and zC <= 3
                rows.append({"i": i, "t": t, "m": m, "c_cf": c_cf, "c_mc": c_mc, "c_se": c_se,
                             "C_cf": C_cf, "C_mc": C_mc, "C_se": C_se})
    metrics = {"worst_z": worst, "rows": rows, "runtime_budget_s": 120}
    if objective_check:
        # supplementary: the value with and without the jump-variance term vs the objective
        prof = Profile(StrategyKind.FULL_INFO_MARKOV, coeffs, params)
        x = np.ones(coeffs.N)
        est = estimate_objective(prof, investors[0], 0.0, x, 1, ObjectiveConfig(n_paths=10_000))
        v_jump = value_function("full_info_markov", 0.0, x, 1, investors[0], coeffs, params,
                                include_jump_variance=True)
        v_plain = value_function("full_info_markov", 0.0, x, 1, investors[0], coeffs, params,
                                 include_jump_variance=False)
        metrics["objective_z_with_jump_variance"] = (est.J - v_jump) / est.se_J
        metrics["objective_z_without_jump_variance"] = (est.J - v_plain) / est.se_J
    return CriterionResult(6, "regime-switching closed forms", bool(ok), metrics,
                           f"worst |z| = {worst:.2f} (need <= 3)")


# ---------------------------------------------------------------------------
# equilibrium
# ---------------------------------------------------------------------------


@_timed
def criterion_7(ctx: Context | None = None) -> CriterionResult:
    """``mu1 = mu2``: the partial-information strategy equals the constant
    full-information strategy within 1e-12."""
    from mvgame.cauchy import build_tables, default_t_nodes

    params, _, coeffs = figure_1_setup(mu1=0.2, mu2=0.2)
    mc = MCConfig(n_paths_c=64, n_paths_dc=64, dt=0.1)
    table = build_tables(params, coeffs, t_nodes=default_t_nodes(params.T, 11), mc=mc)
    worst = 0.0
    for t in PROBE_T:
        for p in PROBE_P:
            for i in range(coeffs.N):
                a = strategy_value("partial_info", t, p, i, coeffs, params, table)
                b = strategy_value("full_info_constant", t, None, i, coeffs, params)
                worst = max(worst, abs(a - b))
    return CriterionResult(7, "degenerate reduction", worst <= 1e-12, {"max_abs_diff": worst},
                           f"max |diff| = {worst:.1e}")


@_timed
def criterion_8(ctx: Context | None = None, cfg: ObjectiveConfig = ObjectiveConfig(dt=0.005),
                i: int = 0, variants=("derived", "paper_plus", "paper_minus")) -> CriterionResult:
    """Value function vs Monte Carlo objective at equilibrium on the 3x3
    probe grid, Figure-1 parameters, ``x_i = 1``. Each ``C``-variant gets its
    own table; the adopted variant is the one that passes."""
    ctx = ctx or Context()
    params, _, coeffs = figure_1_setup()
    base = ctx.table(1)
    tables = {"derived": base}
    for v in variants:
        if v not in tables:
            tables[v] = solve_second_cauchy(params, coeffs, dataclasses.replace(base, C=None),
                                            variant=v)
    x = np.ones(coeffs.N)
    prof = Profile(StrategyKind.PARTIAL_INFO, coeffs, params, base)
    rows = []
    zs = {v: [] for v in variants}
    for t in PROBE_T:
        for p in PROBE_P:
            est = estimate_objective(prof, i, t, x, p, cfg)
            row = {"t": t, "p": p, "J": est.J, "se_J": est.se_J}
            for v in variants:
                V = value_function("partial_info", t, x, p, i, coeffs, params, tables[v])
                row[f"V_{v}"] = V
                zs[v].append((est.J - V) / est.se_J)
            rows.append(row)
    worst = {v: float(np.max(np.abs(zs[v]))) for v in variants}
    passed_variants = [v for v in variants if worst[v] <= 3]
    ok = "derived" in passed_variants
    notes = "; ".join(f"{v}: max|z|={worst[v]:.2f}" for v in variants)
    return CriterionResult(8, "value-objective consistency", ok,
                           {"max_abs_z": worst, "rows": rows, "passing_variants": passed_variants,
                            "adopted_variant": "derived"}, notes)


@_timed
def criterion_9(ctx: Context | None = None, cfg: ObjectiveConfig = ObjectiveConfig(),
                i: int = 0) -> CriterionResult:
    """No constant perturbation improves ``J_i`` at the full-information
    equilibrium; the Merton profile (relative terms dropped) fails."""
    params, _, coeffs = figure_1_setup()
    x = np.ones(coeffs.N)
    eq = intra_equilibrium_test(Profile(StrategyKind.FULL_INFO_CONSTANT, coeffs, params),
                                i, 0.0, x, None, cfg=cfg)
    neg = intra_equilibrium_test(Profile(StrategyKind.MERTON, coeffs, params),
                                 i, 0.0, x, None, cfg=cfg)
    ok = eq.passed and not neg.passed
    z_eq = max(r.z for r in eq.results)
    z_neg = max(r.z for r in neg.results)
    return CriterionResult(9, "intra-personal equilibrium", ok,
                           {"equilibrium_max_z": z_eq, "negative_control_max_z": z_neg,
                            "equilibrium_reason": eq.reason, "negative_control_reason": neg.reason},
                           f"equilibrium max z = {z_eq:.1f}; negative control max z = {z_neg:.1f}")


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------


def figure_distributions(which: int, ctx: Context, R: int = 100, seed: int = FIGURE_SEED,
                         x0: float = 1.0, prior: float = 0.5):
    params, _, coeffs = figure_1_setup() if which == 1 else figure_2_setup()
    full = "full_info_constant" if which == 1 else "full_info_markov"
    x = np.full(coeffs.N, x0)
    out = {}
    for kind in (full, "partial_info"):
        sc = Scenario(params, coeffs, kind, x, prior=prior, table=ctx.table(which), seed=seed)
        out[kind] = loss_distribution(sc, R)
    return out


@_timed
def criterion_10(ctx: Context | None = None, R: int = 100) -> CriterionResult:
    """Figure 1: no defaults under full information; all-default probability
    in [0.20, 0.50] under partial information."""
    ctx = ctx or Context()
    d = figure_distributions(1, ctx, R)
    full, part = d["full_info_constant"], d["partial_info"]
    n_full = int(full.counts[1:].sum())
    p_all = part.p_all_default
    ok = n_full == 0 and 0.20 <= p_all <= 0.50
    return CriterionResult(10, "Figure 1 loss distributions", ok,
                           {"full_info_counts": full.counts, "partial_info_counts": part.counts,
                            "partial_p_all_default": p_all, "runtime_budget_s": 900},
                           f"full-info realizations with defaults = {n_full}; "
                           f"partial P(all default) = {p_all:.2f} (need 0.20-0.50)")


@_timed
def criterion_11(ctx: Context | None = None, R: int = 100) -> CriterionResult:
    """Figure 2: all-default probability rises by at least 5 points from full
    to partial information; full-information value in [0.25, 0.60]."""
    ctx = ctx or Context()
    d = figure_distributions(2, ctx, R)
    pf = d["full_info_markov"].p_all_default
    pp = d["partial_info"].p_all_default
    ok = (pp - pf) >= 0.05 and 0.25 <= pf <= 0.60
    return CriterionResult(11, "Figure 2 loss distributions", ok,
                           {"full_info_counts": d["full_info_markov"].counts,
                            "partial_info_counts": d["partial_info"].counts,
                            "full_p_all_default": pf, "partial_p_all_default": pp},
                           f"P(all default) full {pf:.2f} -> partial {pp:.2f} "
                           f"(need +0.05 and full in 0.25-0.60)")


@_timed
def criterion_12(ctx: Context | None = None, workdir=None) -> CriterionResult:
    """Artifacts regenerated from their manifest are byte-identical."""
    import pathlib
    import tempfile

    from mvgame import cli

    tmp = tempfile.TemporaryDirectory() if workdir is None else None
    root = pathlib.Path(workdir or tmp.name)
    cfg = root / "det.toml"
    cfg.write_text(cli.DETERMINISM_CONFIG)
    a, b, c = root / "run_a", root / "run_b", root / "run_c"
    codes = [cli.main(["simulate", "--config", str(cfg), "--out", str(a)]),
             cli.main(["simulate", "--config", str(cfg), "--out", str(b)]),
             cli.main(["simulate", "--config", str(a / "manifest.toml"), "--out", str(c)])]
    diffs = []
    files = sorted(p.name for p in a.iterdir() if p.suffix in (".csv", ".json", ".toml"))
    for name in files:
        ref = (a / name).read_bytes()
        for other in (b, c):
            if not (other / name).exists() or (other / name).read_bytes() != ref:
                diffs.append(f"{other.name}/{name}")
    ok = all(code == 0 for code in codes) and not diffs and bool(files)
    if tmp is not None:
        tmp.cleanup()
    return CriterionResult(12, "determinism", ok, {"exit_codes": codes, "files": files,
                                                   "mismatches": diffs},
                           f"{len(files)} artifacts compared, {len(diffs)} mismatches")


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11, 12: criterion_12,
}

SUITES = {
    "filter": (1, 2, 3),
    "cauchy": (4, 5, 6),
    "equilibrium": (7, 8, 9),
    "figures": (10, 11),
}


def run_suite(name: str, ctx: Context | None = None, log=print):
    ctx = ctx or Context()
    results = []
    for k in SUITES[name]:
        res = CRITERIA[k](ctx)
        log(res.line())
        results.append(res)
    return results
