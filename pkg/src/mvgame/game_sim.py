"""N-investor wealth simulation against a simulated market, with defaults.

Each realization simulates the stock (and hidden chain), filters the observed
log-returns, evaluates every investor's strategy on the grid and Euler-steps
all wealth equations with the increments that drove the stock. Defaults are
recorded (wealth below 0 at any grid time) but not absorbing.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from mvgame.cauchy import CauchyTable
from mvgame.core_model import (
    EquilibriumCoefficients,
    MarketParams,
    NumericalError,
    ParameterError,
    params_hash,
)
from mvgame.equilibrium import StrategyKind, profile_values
from mvgame.filtering import Truth, posterior_closed_form, posterior_from_observations, simulate_truth
from mvgame.stochastic_engine import PosteriorPath, TimeGrid

log = logging.getLogger(__name__)


@dataclass
class Scenario:
    """Everything a realization needs. ``dt`` defaults to ``1e-3 T``."""

    params: MarketParams
    coeffs: EquilibriumCoefficients
    kind: StrategyKind
    x0: np.ndarray
    prior: float = 0.5
    dt: float | None = None
    table: CauchyTable | None = None
    seed: int = 0
    s0: float = 1.0
    audit: bool = False

    def __post_init__(self):
        self.kind = StrategyKind(self.kind)
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.coeffs.N,):
            raise ParameterError("x0 must hold one initial wealth per investor")
        if not 0 < self.prior < 1:
            raise ParameterError("prior must lie in (0, 1)")
        if self.dt is None:
            self.dt = 1e-3 * self.params.T
        if not self.dt > 0:
            raise ParameterError("dt must be > 0")
        if self.kind is StrategyKind.PARTIAL_INFO and self.table is None:
            raise ParameterError("partial-information scenarios need a CauchyTable")
        if self.kind is StrategyKind.FULL_INFO_MARKOV and not self.params.alternating:
            raise ParameterError("full_info_markov needs alternating mode")

    @property
    def grid(self) -> TimeGrid:
        n = max(1, int(round(self.params.T / self.dt)))
        return TimeGrid(0.0, self.params.T, n)

    @property
    def N(self) -> int:
        return self.coeffs.N


@dataclass
class SimResult:
    times: np.ndarray
    wealth: np.ndarray  # (N, n_steps + 1)
    strategy: np.ndarray  # (N, n_steps + 1); the last column is unused by the dynamics
    posterior: PosteriorPath
    truth_mu: float | None
    chain: np.ndarray | None
    defaults: np.ndarray  # bool (N,)
    seed: int
    realization: int
    xbar_identity_error: float = 0.0

    @property
    def n_defaults(self) -> int:
        return int(self.defaults.sum())


def _observable_state(kind: StrategyKind, truth: Truth, posterior: PosteriorPath, params):
    """The only state a strategy may see. Partial-information kinds get the
    filter and nothing else."""
    if kind.partial:
        return posterior.values[0]
    if kind is StrategyKind.FULL_INFO_MARKOV or (kind is StrategyKind.MERTON and params.alternating):
        return truth.chain[0]
    return None


def _strategies(scenario: Scenario, times, state) -> np.ndarray:
    """Strategy matrix of shape ``(N, len(times))`` from ``(t, state)`` only."""
    vals = profile_values(scenario.kind, times, state, scenario.coeffs, scenario.params,
                          scenario.table)
    return np.ascontiguousarray(vals)


def run_realization(scenario: Scenario, realization: int = 0) -> SimResult:
    """One market path, one filter path, all N wealth paths.

    Wealth step: ``X += r X dt + pi (dY + sigma^2 dt/2 - r dt)`` with ``dY``
    the observed log-return, so wealth and stock share one noise source.
    """
    params = scenario.params
    grid = scenario.grid
    truth = simulate_truth(params, grid, scenario.seed, realization, 1, scenario.s0)
    if params.alternating:
        post = posterior_from_observations(None, scenario.prior, params, grid,
                                           log_returns=truth.log_returns)
    else:
        post = posterior_closed_form(truth.log_returns, scenario.prior, params, grid)
    state = _observable_state(scenario.kind, truth, post, params)
    if scenario.audit and scenario.kind.partial and not np.shares_memory(state, post.values):
        raise RuntimeError("partial-information strategy saw a non-filter state")
    times = grid.times
    pi = _strategies(scenario, times, state)
    dt = grid.dt
    excess = truth.log_returns[0] + 0.5 * params.sigma**2 * dt - params.r * dt
    n = grid.n_steps
    X = np.empty((scenario.N, n + 1))
    X[:, 0] = scenario.x0
    xbar = np.empty(n + 1)
    xbar[0] = scenario.x0.mean()
    pibar = pi.mean(axis=0)
    err = 0.0
    for k in range(n):
        X[:, k + 1] = X[:, k] + params.r * X[:, k] * dt + pi[:, k] * excess[k]
        # population average integrated on its own, as a conservation check
        xbar[k + 1] = xbar[k] + params.r * xbar[k] * dt + pibar[k] * excess[k]
        err = max(err, abs(X[:, k + 1].mean() - xbar[k + 1]))
    if not np.all(np.isfinite(X)):
        raise NumericalError(f"non-finite wealth in realization {realization} (seed {scenario.seed})")
    defaults = (X < 0).any(axis=1)
    return SimResult(times, X, pi, post, truth.mu, None if truth.chain is None else truth.chain[0],
                     defaults, scenario.seed, realization, err)


@dataclass
class LossDistribution:
    counts: np.ndarray  # counts[k] = realizations with exactly k defaults
    R: int
    terminal_wealth: np.ndarray = field(repr=False, default=None)  # (R, N)
    clamp_count: int = 0
    table_clamps: int = 0

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.R

    @property
    def p_all_default(self) -> float:
        return float(self.counts[-1] / self.R)

    @property
    def p_any_default(self) -> float:
        return float(1.0 - self.counts[0] / self.R)


def loss_distribution(scenario: Scenario, R: int = 100, keep=None) -> LossDistribution:
    """Default-count histogram over ``R`` realizations ``0..R-1``.

    ``keep`` may be a list; every :class:`SimResult` is appended to it.
    """
    if R < 1:
        raise ParameterError("R must be >= 1")
    counts = np.zeros(scenario.N + 1, dtype=int)
    terminal = np.empty((R, scenario.N))
    clamps = 0
    before = scenario.table.clamp_warnings if scenario.table is not None else 0
    for r in range(R):
        try:
            res = run_realization(scenario, r)
        except (NumericalError, FloatingPointError) as exc:
            raise NumericalError(f"realization {r} (seed {scenario.seed}) failed: {exc}") from exc
        counts[res.n_defaults] += 1
        terminal[r] = res.wealth[:, -1]
        clamps += res.posterior.clamp_count
        if keep is not None:
            keep.append(res)
    after = scenario.table.clamp_warnings if scenario.table is not None else 0
    return LossDistribution(counts, R, terminal, clamps, after - before)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _comment(fh, comment):
    if comment:
        fh.write(f"# {comment}\n")


def write_wealth_csv(path, results, comment: str | None = None) -> None:
    """Columns ``realization, t, i, X, pi`` (``i`` 1-based); ``comment``
    becomes a leading ``#`` line."""
    with open(path, "w", newline="") as fh:
        _comment(fh, comment)
        fh.write("realization,t,i,X,pi\n")
        for res in results:
            N, n = res.wealth.shape
            t = np.tile(res.times, N)
            i = np.repeat(np.arange(1, N + 1), n)
            r = np.full(N * n, res.realization)
            data = np.column_stack([r, t, i, res.wealth.ravel(), res.strategy.ravel()])
            np.savetxt(fh, data, delimiter=",", fmt=["%d", "%.10g", "%d", "%.17g", "%.17g"])


def write_posterior_csv(path, results, comment: str | None = None) -> None:
    """Columns ``realization, t, P, innovation_increment``."""
    with open(path, "w", newline="") as fh:
        _comment(fh, comment)
        fh.write("realization,t,P,innovation_increment\n")
        for res in results:
            post = res.posterior
            inc = np.append(post.innovations[0], np.nan)
            r = np.full(len(res.times), res.realization)
            data = np.column_stack([r, res.times, post.values[0], inc])
            np.savetxt(fh, data, delimiter=",", fmt=["%d", "%.10g", "%.17g", "%.17g"])


def write_loss_hist_csv(path, dist: LossDistribution, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        _comment(fh, comment)
        fh.write("k,count\n")
        for k, c in enumerate(dist.counts):
            fh.write(f"{k},{c}\n")


def summary(scenario: Scenario, dist: LossDistribution) -> dict:
    tw = dist.terminal_wealth
    return {
        "kind": scenario.kind.value,
        "R": dist.R,
        "seed": scenario.seed,
        "realization_seeds": [[scenario.seed, r] for r in range(dist.R)],
        "params_hash": params_hash(scenario.params, scenario.coeffs, scenario.x0.tolist(),
                                   scenario.prior, scenario.dt),
        "default_counts": dist.counts.tolist(),
        "default_probabilities": dist.probabilities.tolist(),
        "p_all_default": dist.p_all_default,
        "p_any_default": dist.p_any_default,
        "terminal_wealth_mean": tw.mean(axis=0).tolist(),
        "terminal_wealth_sd": tw.std(axis=0, ddof=1).tolist() if dist.R > 1 else None,
        "posterior_clamps": dist.clamp_count,
        "table_clamps": dist.table_clamps,
    }


def write_summary_json(path, scenario: Scenario, dist: LossDistribution) -> None:
    with open(path, "w") as fh:
        json.dump(summary(scenario, dist), fh, indent=2, sort_keys=True)
        fh.write("\n")


def mean_terminal_wealth_se(dist: LossDistribution) -> tuple[float, float]:
    """Mean over realizations and investors of terminal wealth, with the
    standard error across realizations."""
    per_r = dist.terminal_wealth.mean(axis=1)
    return float(per_r.mean()), float(per_r.std(ddof=1) / math.sqrt(len(per_r)))
