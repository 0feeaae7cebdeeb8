"""Posterior of the high-drift state from an observed stock path.

Two routes are provided. ``posterior_closed_form`` evaluates the explicit
Bayes formula for a constant unknown drift (written in log-odds form, which
avoids overflow for long horizons). ``posterior_from_observations`` integrates
the filter SDE, with the innovations increments built from observed
log-returns; it works in both drift modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from mvgame.core_model import MarketParams, ParameterError
from mvgame.stochastic_engine import (
    EPS_CLAMP,
    PosteriorPath,
    TimeGrid,
    _clamp,
    _overshoots,
    brownian_bundle,
    simulate_chain,
)

__all__ = [
    "Truth",
    "PosteriorPath",
    "simulate_truth",
    "posterior_closed_form",
    "posterior_from_observations",
]


@dataclass
class Truth:
    """Simulated market truth on a grid.

    ``log_returns[j, k] = log(S(t_{k+1}) / S(t_k))`` for path ``j``. ``dW`` are
    the Brownian increments that generated them; wealth simulations reuse
    them so that stock and wealth share one noise source. ``chain`` is the
    hidden state path (alternating mode) or ``None`` (constant mode, where
    ``mu`` is the true drift).
    """

    grid: TimeGrid
    log_returns: np.ndarray
    dW: np.ndarray
    s0: float
    mu: float | None
    chain: np.ndarray | None

    @property
    def stock(self) -> np.ndarray:
        cum = np.cumsum(self.log_returns, axis=1)
        return self.s0 * np.exp(np.concatenate([np.zeros((cum.shape[0], 1)), cum], axis=1))


def simulate_truth(params: MarketParams, grid: TimeGrid, seed: int, realization: int = 0,
                   n_paths: int = 1, s0: float = 1.0) -> Truth:
    """Exact log-Euler stepping of the stock: the drift is held fixed over
    each step (the true constant, or the chain state at the step start)."""
    if not s0 > 0:
        raise ParameterError("s0 must be > 0")
    bundle = brownian_bundle(grid, n_paths, seed, realization, purpose="stock")
    dt = grid.dt
    if params.alternating:
        chain = simulate_chain(grid, params.q1, params.q2, params.state, seed, realization,
                               n_paths, purpose="chain")
        mu = params.mu_of(chain[:, :-1])
        mu_tag = None
    else:
        chain = None
        mu = params.true_mu
        mu_tag = params.true_mu
    log_returns = (mu - 0.5 * params.sigma**2) * dt + params.sigma * bundle.dW
    return Truth(grid, log_returns, bundle.dW, s0, mu_tag, chain)


def _log_returns_from(stock_path) -> np.ndarray:
    s = np.atleast_2d(np.asarray(stock_path, dtype=float))
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise ParameterError("stock path must be finite and strictly positive")
    return np.diff(np.log(s), axis=1)


def _check_prior(prior):
    if not 0 < prior < 1:
        raise ParameterError(f"prior must lie in (0, 1), got {prior}")


def posterior_closed_form(log_returns, prior: float, params: MarketParams,
                          grid: TimeGrid, eps: float = EPS_CLAMP) -> PosteriorPath:
    """Explicit posterior for a constant unknown drift.

    With ``a_j = mu_j - sigma^2/2`` and ``Y(u)`` the cumulative log-return,
    the log-odds of state 1 are
    ``logit(prior) + (a_1 - a_2) Y / sigma^2 - (a_1^2 - a_2^2) u / (2 sigma^2)``.
    Innovations are backed out of the log-returns with the posterior at the
    start of each step.
    """
    if params.alternating:
        raise ParameterError("no closed-form posterior in alternating mode")
    _check_prior(prior)
    lr = np.atleast_2d(np.asarray(log_returns, dtype=float))
    if lr.shape[1] != grid.n_steps:
        raise ParameterError("log_returns length must equal grid.n_steps")
    s2 = params.sigma**2
    a1, a2 = params.mu1 - 0.5 * s2, params.mu2 - 0.5 * s2
    Y = np.concatenate([np.zeros((lr.shape[0], 1)), np.cumsum(lr, axis=1)], axis=1)
    u = grid.times - grid.t0
    L = logit(prior) + (a1 - a2) / s2 * Y - (a1**2 - a2**2) / (2 * s2) * u
    P = expit(L)
    clamps = _clamp(P, eps)
    innov = (lr - (params.theta(P[:, :-1]) - 0.5 * s2) * grid.dt) / params.sigma
    return PosteriorPath(grid, P, innov, "P", clamps, log_odds=L)


def posterior_from_observations(stock_path, prior: float, params: MarketParams,
                                grid: TimeGrid, eps: float = EPS_CLAMP,
                                log_returns=None) -> PosteriorPath:
    """Euler-Maruyama filter driven by observed innovations.

    Per step: ``dW_hat = (dY - (theta(P) - sigma^2/2) dt) / sigma`` and
    ``P += eta(P) dt + beta(P) dW_hat``. Pass ``log_returns`` directly to skip
    the price-to-return conversion.
    """
    _check_prior(prior)
    lr = _log_returns_from(stock_path) if log_returns is None else np.atleast_2d(
        np.asarray(log_returns, dtype=float))
    if lr.shape[1] != grid.n_steps:
        raise ParameterError("observation length must match the grid")
    dt = grid.dt
    s2 = params.sigma**2
    out = np.empty((lr.shape[0], grid.n_steps + 1))
    innov = np.empty_like(lr)
    p = np.full(lr.shape[0], float(prior))
    out[:, 0] = p
    clamps = overshoots = 0
    for k in range(grid.n_steps):
        dw = (lr[:, k] - (params.theta(p) - 0.5 * s2) * dt) / params.sigma
        innov[:, k] = dw
        p = p + params.eta(p) * dt + params.beta(p) * dw
        overshoots += _overshoots(p)
        clamps += _clamp(p, eps)
        out[:, k + 1] = p
    return PosteriorPath(grid, out, innov, "P", clamps, overshoot_count=overshoots)
