"""Equilibrium strategies, value functions and Monte Carlo objectives.

All strategies are dollar amounts held in the stock. Every equilibrium has
the form ``exp(-r (T - t)) * (first term - second term)``; the second term
(``beta(p)/sigma`` times the slopes of ``c``) only appears under partial
information. Investor indices are 0-based.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from mvgame.cauchy import CauchyTable, closed_form_C_markov, constant_source
from mvgame.core_model import (
    EquilibriumCoefficients,
    MarketParams,
    NumericalError,
    ParameterError,
)
from mvgame.stochastic_engine import EPS_CLAMP, make_rng, simulate_chain, TimeGrid


class StrategyKind(str, enum.Enum):
    FULL_INFO_CONSTANT = "full_info_constant"
    FULL_INFO_MARKOV = "full_info_markov"
    PARTIAL_INFO = "partial_info"
    PARTIAL_INFO_FIRST_TERM = "partial_info_first_term"
    MERTON = "merton"

    @property
    def partial(self) -> bool:
        return self in (StrategyKind.PARTIAL_INFO, StrategyKind.PARTIAL_INFO_FIRST_TERM)


def _discount(t, params: MarketParams):
    return np.exp(-params.r * (params.T - np.asarray(t, dtype=float)))


def _check_kind_state(kind: StrategyKind, state, params: MarketParams, table):
    kind = StrategyKind(kind)
    if kind.partial:
        if state is None:
            raise ParameterError(f"{kind.value} needs the filter state p")
        p = np.asarray(state, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise ParameterError("filter state must lie in (0, 1)")
        if kind is StrategyKind.PARTIAL_INFO and table is None:
            raise ParameterError("partial-information strategies need a CauchyTable")
    elif kind is StrategyKind.FULL_INFO_MARKOV:
        if not params.alternating:
            raise ParameterError("full_info_markov needs alternating mode")
        if state is None or not np.all(np.isin(np.asarray(state), (1, 2))):
            raise ParameterError("full_info_markov needs the chain state m in {1, 2}")
    elif state is not None and kind is StrategyKind.FULL_INFO_CONSTANT:
        raise ParameterError("full_info_constant takes no state")
    return kind


def strategy_terms(kind, t, state, coeffs: EquilibriumCoefficients, params: MarketParams,
                   table: CauchyTable | None = None):
    """``(first, second)`` terms for every investor, each of shape
    ``(N,) + shape(state)``, already discounted. The strategy is
    ``first - second``."""
    kind = _check_kind_state(kind, state, params, table)
    disc = _discount(t, params)
    eff = coeffs.effective_kappa
    s2 = params.sigma**2
    if kind is StrategyKind.FULL_INFO_CONSTANT:
        prem = np.asarray(params.true_mu - params.r, dtype=float)
    elif kind is StrategyKind.FULL_INFO_MARKOV:
        prem = params.mu_of(state) - params.r
    elif kind is StrategyKind.MERTON:
        mu = params.true_mu if state is None else params.mu_of(state)
        prem = np.asarray(mu - params.r, dtype=float)
    else:
        prem = params.theta(np.asarray(state, dtype=float)) - params.r
    # broadcast so that t and the state may both be arrays
    prem = disc * prem
    shape = (-1,) + (1,) * np.ndim(prem)
    if kind is StrategyKind.MERTON:
        first = prem[None] / (s2 * coeffs.gamma.reshape(shape))
        return first, np.zeros_like(first)
    first = eff.reshape(shape) * (prem / s2)[None]
    if kind is StrategyKind.PARTIAL_INFO:
        hedge = table.interp("hedge", t, state)  # beta(p) dc_j/dp for every j
        hedge_bar = hedge.mean(axis=0)
        second = disc * (hedge + coeffs.relative_weight.reshape(shape) * hedge_bar[None]) / params.sigma
    else:
        second = np.zeros_like(first)
    return first, second


def profile_values(kind, t, state, coeffs, params, table=None) -> np.ndarray:
    """Strategy values of all investors, shape ``(N,) + shape(state)``."""
    first, second = strategy_terms(kind, t, state, coeffs, params, table)
    return first - second


def strategy_value(kind, t, state, i: int, coeffs: EquilibriumCoefficients,
                   params: MarketParams, table: CauchyTable | None = None):
    """Equilibrium dollar amount in the stock for investor ``i``.

    ``state`` is ``None`` (full information, constant drift), the chain
    state ``m`` (regime switching) or the filter value ``p`` (partial
    information). ``MERTON`` is the single-agent ratio with every
    relative-performance term dropped; it is used as a negative control.
    """
    if not 0 <= t <= params.T:
        raise ParameterError("t must lie in [0, T]")
    v = profile_values(kind, t, state, coeffs, params, table)[i]
    return float(v) if np.ndim(v) == 0 else v


def aggregate_strategy(values) -> float:
    """Arithmetic mean of the investors' strategies."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ParameterError("cannot aggregate an empty profile")
    return values.mean(axis=0)


def aggregate_closed_form(kind, t, state, coeffs: EquilibriumCoefficients,
                          params: MarketParams, table: CauchyTable | None = None):
    """Population average of the equilibrium strategies in closed form:
    ``exp(-r(T-t)) (kappa_bar m / sigma - hedge_bar / sigma) / (1 - lv_bar)``
    with ``m`` the market price of risk."""
    kind = _check_kind_state(kind, state, params, table)
    disc = _discount(t, params)
    if kind is StrategyKind.FULL_INFO_CONSTANT:
        prem = params.true_mu - params.r
    elif kind is StrategyKind.FULL_INFO_MARKOV:
        prem = params.mu_of(state) - params.r
    elif kind.partial:
        prem = params.theta(np.asarray(state, dtype=float)) - params.r
    else:
        raise ParameterError("no closed-form aggregate for this kind")
    val = coeffs.kappa_bar * prem / params.sigma**2
    if kind is StrategyKind.PARTIAL_INFO:
        val = val - table.interp("hedge", t, state).mean(axis=0) / params.sigma
    return disc * val / (1.0 - coeffs.lambda_v_bar)


def others_mean(x, i: int) -> float:
    """``(1/N) sum_{j != i} x_j``: the population average without investor i."""
    x = np.asarray(x, dtype=float)
    return (x.sum() - x[i]) / len(x)


def value_function(kind, t, x, state, i: int, coeffs: EquilibriumCoefficients,
                   params: MarketParams, table: CauchyTable | None = None,
                   variant: str = "derived", include_jump_variance: bool = True,
                   C_value: float | None = None) -> float:
    """``V_i = A_i(t) x_i + B_i(t) xbar_(-i) + C_i`` with
    ``A_i = (1 - lm_i/N) e^{r(T-t)}`` and ``B_i = -lm_i e^{r(T-t)}``.

    ``C_i`` is ``(T - t) N_i`` for a constant known drift, the regime
    closed form in the Markov case, or read from ``table`` under partial
    information; ``C_value`` overrides the lookup (e.g. with a direct
    Monte Carlo estimate).
    """
    kind = _check_kind_state(kind, state, params, table if C_value is None else object())
    x = np.asarray(x, dtype=float)
    if x.shape != (coeffs.N,):
        raise ParameterError("x must hold one wealth per investor")
    growth = math.exp(params.r * (params.T - t))
    lm = coeffs.lambda_m[i]
    base = (1 - lm / coeffs.N) * growth * x[i] - lm * growth * others_mean(x, i)
    if C_value is not None:
        C = C_value
    elif kind is StrategyKind.FULL_INFO_CONSTANT:
        C = (params.T - t) * constant_source(i, params, coeffs, params.true_mu, variant)
    elif kind is StrategyKind.FULL_INFO_MARKOV:
        C = float(closed_form_C_markov(t, int(state), i, params, coeffs, variant,
                                       include_jump_variance))
    elif kind is StrategyKind.PARTIAL_INFO:
        if table.C is None:
            raise ParameterError("table has no C values")
        C = float(table.interp("C", t, state, i))
    else:
        raise ParameterError(f"no value function for {kind.value}")
    return float(base + C)


# ---------------------------------------------------------------------------
# Monte Carlo objective
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveConfig:
    n_paths: int = 20_000
    dt: float = 0.01
    seed: int = 7
    n_batches: int = 50
    realization: int = 0

    def __post_init__(self):
        if self.n_paths < 2 * self.n_batches or self.n_batches < 2:
            raise ParameterError("need n_batches >= 2 and at least 2 paths per batch")
        if not self.dt > 0:
            raise ParameterError("dt must be > 0")


@dataclass(frozen=True)
class Perturbation:
    """Constant offset ``delta`` added to investor ``i`` on ``[t0, t0 + h)``."""

    i: int
    delta: float
    t0: float
    h: float


@dataclass
class ObjectiveEstimate:
    mean_term: float
    variance_term: float
    J: float
    se_mean: float
    se_variance: float
    se_J: float
    n_paths: int
    batch_J: np.ndarray = field(repr=False, default=None)


@dataclass
class Profile:
    """A strategy profile: one kind for every investor."""

    kind: StrategyKind
    coeffs: EquilibriumCoefficients
    params: MarketParams
    table: CauchyTable | None = None

    def values(self, t, state) -> np.ndarray:
        return profile_values(self.kind, t, state, self.coeffs, self.params, self.table)


def _state_kind(profile: Profile) -> str:
    if profile.kind.partial:
        return "filter"
    if profile.kind is StrategyKind.FULL_INFO_MARKOV or (
            profile.kind is StrategyKind.MERTON and profile.params.alternating):
        return "chain"
    return "none"


def _simulate_terminal(profile: Profile, i: int, t: float, x, state, cfg: ObjectiveConfig,
                       perturbations=()):
    """Terminal wealth of all investors, shape ``(N, n_paths)``, for the base
    profile and for each perturbation (same increments)."""
    params = profile.params
    x = np.asarray(x, dtype=float)
    tau = params.T - t
    n_steps = max(1, int(round(tau / cfg.dt)))
    dt = tau / n_steps
    n = cfg.n_paths
    rng = make_rng(cfg.seed, cfg.realization, "objective")
    kind = _state_kind(profile)
    chain = None
    if kind == "chain":
        grid = TimeGrid(t, params.T, n_steps)
        chain = simulate_chain(grid, params.q1, params.q2, int(state), cfg.seed,
                               cfg.realization, n, purpose="objective_chain")
    if kind == "filter":
        P = np.full(n, float(state))
        L = logit(P)
        kb = (params.mu1 - params.mu2) / params.sigma
    runs = [None] + list(perturbations)
    X = [np.repeat(x[:, None], n, axis=1) for _ in runs]
    sq = math.sqrt(dt)
    for k in range(n_steps):
        u = t + k * dt
        dW = rng.standard_normal(n) * sq
        if kind == "filter":
            pi = profile.values(u, P)
            prem = params.theta(P) - params.r
        elif kind == "chain":
            m = chain[:, k]
            pi = profile.values(u, m)
            prem = params.mu_of(m) - params.r
        else:
            pi = np.broadcast_to(profile.values(u, None)[:, None], (profile.coeffs.N, n))
            prem = params.true_mu - params.r
        gain = prem * dt + params.sigma * dW
        for X_r, pert in zip(X, runs):
            if pert is not None and pert.t0 <= u + 1e-12 < pert.t0 + pert.h:
                pi_r = pi.copy()
                pi_r[pert.i] = pi_r[pert.i] + pert.delta
            else:
                pi_r = pi
            X_r += params.r * X_r * dt + pi_r * gain
        if kind == "filter":
            if params.alternating:
                P = P + params.eta(P) * dt + params.beta(P) * dW
            else:
                L += (P - 0.5) * kb * kb * dt + kb * dW
                P = expit(L)
            np.clip(P, EPS_CLAMP, 1 - EPS_CLAMP, out=P)
    for X_r in X:
        if not np.all(np.isfinite(X_r)):
            raise NumericalError("wealth paths exploded in the objective simulation")
    return X


def _objective_from_terminal(XT, i, coeffs, cfg: ObjectiveConfig) -> ObjectiveEstimate:
    xbar = XT.mean(axis=0)
    dm = XT[i] - coeffs.lambda_m[i] * xbar
    dv = XT[i] - coeffs.lambda_v[i] * xbar
    g = coeffs.gamma[i]
    B = cfg.n_batches
    bm = dm[: (len(dm) // B) * B].reshape(B, -1)
    bv = dv[: (len(dv) // B) * B].reshape(B, -1)
    mean_b = bm.mean(axis=1)
    var_b = bv.var(axis=1, ddof=1)
    J_b = mean_b - 0.5 * g * var_b
    mean_term = float(dm.mean())
    var_term = float(dv.var(ddof=1))
    sq = math.sqrt(B)
    return ObjectiveEstimate(
        mean_term=mean_term,
        variance_term=var_term,
        J=mean_term - 0.5 * g * var_term,
        se_mean=float(mean_b.std(ddof=1) / sq),
        se_variance=float(var_b.std(ddof=1) / sq),
        se_J=float(J_b.std(ddof=1) / sq),
        n_paths=len(dm),
        batch_J=J_b,
    )


def estimate_objective(profile: Profile, i: int, t: float, x, state,
                       cfg: ObjectiveConfig = ObjectiveConfig()) -> ObjectiveEstimate:
    """Monte Carlo estimate of ``J_i`` at ``(t, x, state)``.

    All N wealth equations are stepped jointly with shared noise. Under
    partial information the state is the filter, simulated under the
    observation measure (innovations form); its wealth drift is
    ``pi (theta(P) - r)``. Standard errors come from batch means.
    """
    if not 0 <= t < profile.params.T:
        raise ParameterError("t must lie in [0, T)")
    XT = _simulate_terminal(profile, i, t, x, state, cfg)[0]
    return _objective_from_terminal(XT, i, profile.coeffs, cfg)


@dataclass
class PerturbationResult:
    h: float
    delta: float
    improvement: float
    joint_se: float

    @property
    def z(self) -> float:
        return self.improvement / self.joint_se if self.joint_se > 0 else 0.0


@dataclass
class IntraEquilibriumReport:
    i: int
    t: float
    results: list
    passed: bool
    reason: str

    def significant(self, n_se: float = 2.0):
        return [r for r in self.results if r.improvement > n_se * r.joint_se]


def intra_equilibrium_test(profile: Profile, i: int, t: float, x, state,
                           h_grid=(0.05, 0.1), delta_grid=(-1.0, -0.5, 0.5, 1.0),
                           cfg: ObjectiveConfig = ObjectiveConfig(),
                           n_se: float = 2.0) -> IntraEquilibriumReport:
    """Perturb investor ``i`` by constant offsets on ``[t, t+h)`` and compare
    ``J_i`` with the unperturbed profile on common random numbers.

    Passes when no perturbation improves ``J_i`` by more than ``n_se`` joint
    standard errors and the improvement per unit ``h`` does not grow as
    ``h`` shrinks. This is a necessary check only: the perturbation family
    is a small subset of all strategies.
    """
    perts = [Perturbation(i, d, t, h) for h in h_grid for d in delta_grid]
    Xs = _simulate_terminal(profile, i, t, x, state, cfg, perts)
    base = _objective_from_terminal(Xs[0], i, profile.coeffs, cfg)
    results = []
    for pert, XT in zip(perts, Xs[1:]):
        est = _objective_from_terminal(XT, i, profile.coeffs, cfg)
        diff_b = est.batch_J - base.batch_J
        results.append(PerturbationResult(
            pert.h, pert.delta, est.J - base.J,
            float(diff_b.std(ddof=1) / math.sqrt(len(diff_b)))))
    bad = [r for r in results if r.improvement > n_se * r.joint_se]
    reason = "no significant improvement"
    passed = not bad
    if bad:
        reason = f"{len(bad)} perturbation(s) improve J by > {n_se} joint SE"
    else:
        hs = sorted(set(h_grid))
        for d in delta_grid:
            ratios = [(r.improvement / r.h, r.joint_se / r.h) for h in hs for r in results
                      if r.h == h and r.delta == d]
            if ratios and ratios[0][0] > n_se * ratios[0][1]:
                passed, reason = False, f"improvement per unit h is positive at delta={d}"
    return IntraEquilibriumReport(i, t, results, passed, reason)
