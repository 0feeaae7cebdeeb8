"""Seeded random streams, Brownian bundles, chain paths and SDE integrators.

Every random draw comes from a Philox (counter-based) generator keyed by
``(seed, realization, purpose)``, so nested Monte Carlo layers never share
increments and any path can be regenerated in isolation.

Integrators: Euler-Maruyama for the posterior, exponential Euler (log space)
for the tangent process and the density process, so both stay positive.
"""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field

import numpy as np

from mvgame.core_model import MarketParams, ParameterError

log = logging.getLogger(__name__)

EPS_CLAMP = 1e-9
MEASURES = ("P", "Q")


def _purpose_key(purpose) -> int:
    if isinstance(purpose, (int, np.integer)):
        return int(purpose)
    return zlib.crc32(str(purpose).encode())


def make_rng(seed: int, realization: int = 0, purpose="brownian") -> np.random.Generator:
    """Philox generator for one (seed, realization, purpose) stream."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(realization), _purpose_key(purpose)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 1:
            raise ParameterError("n_steps must be >= 1")
        if not self.T > self.t0:
            raise ParameterError(f"need T > t0, got t0={self.t0}, T={self.T}")

    @classmethod
    def from_dt(cls, t0: float, T: float, dt: float) -> "TimeGrid":
        if not dt > 0:
            raise ParameterError(f"dt must be > 0, got {dt}")
        return cls(t0, T, max(1, int(round((T - t0) / dt))))

    @property
    def dt(self) -> float:
        return (self.T - self.t0) / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.T, self.n_steps + 1)


@dataclass
class PathBundle:
    """Brownian increments ``dW`` of shape (n_paths, n_steps), plus an
    optional chain path of shape (n_paths, n_steps + 1)."""

    grid: TimeGrid
    dW: np.ndarray
    seed: tuple
    chain: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.dW.shape[0]


def brownian_bundle(grid: TimeGrid, n_paths: int, seed: int, realization: int = 0,
                    purpose="brownian") -> PathBundle:
    rng = make_rng(seed, realization, purpose)
    dW = rng.standard_normal((n_paths, grid.n_steps))
    dW *= np.sqrt(grid.dt)
    return PathBundle(grid, dW, (seed, realization, str(purpose)))


@dataclass
class PosteriorPath:
    """Posterior probability of the high-drift state on a time grid.

    ``values`` has shape (n_paths, n_steps + 1); ``innovations`` holds the
    Brownian increments that drove it (innovations of the filter when built
    from observations, the bundle increments when simulated directly).
    """

    grid: TimeGrid
    values: np.ndarray
    innovations: np.ndarray
    measure: str = "P"
    clamp_count: int = 0
    log_odds: np.ndarray | None = field(default=None, repr=False)
    overshoot_count: int = 0

    @property
    def overshoot_rate(self) -> float:
        """Fraction of steps whose raw update left the open interval (0, 1)."""
        return self.overshoot_count / self.innovations.size

    @property
    def clamp_rate(self) -> float:
        return self.clamp_count / self.innovations.size

    def to_csv(self, path, path_index: int = 0) -> None:
        """Write columns ``t, P, innovation_increment`` for one path."""
        t = self.grid.times
        inc = np.append(self.innovations[path_index], np.nan)
        data = np.column_stack([t, self.values[path_index], inc])
        np.savetxt(path, data, delimiter=",", header="t,P,innovation_increment",
                   comments="", fmt="%.12g")


def _overshoots(p) -> int:
    return int(np.count_nonzero((p <= 0.0) | (p >= 1.0)))


def _clamp(p, eps):
    bad = (p < eps) | (p > 1.0 - eps)
    n = int(np.count_nonzero(bad))
    if n:
        np.clip(p, eps, 1.0 - eps, out=p)
    return n


def _check_grid(grid: TimeGrid, bundle: PathBundle):
    if bundle.dW.shape[1] != grid.n_steps or bundle.grid != grid:
        raise ParameterError("bundle and grid do not match")


def simulate_posterior(p0, grid: TimeGrid, params: MarketParams, bundle: PathBundle,
                       measure: str = "P", eps: float = EPS_CLAMP) -> PosteriorPath:
    """Euler-Maruyama path of the filter SDE.

    Under ``"P"``: ``dP = eta(P) du + beta(P) dB``. Under ``"Q"`` the drift
    becomes ``eta(P) - beta(P) (theta(P) - r)/sigma``. ``p0`` may be a scalar
    or one starting value per path. Values are clamped into
    ``[eps, 1 - eps]`` after each step; clamps are counted.
    """
    if measure not in MEASURES:
        raise ParameterError(f"measure must be one of {MEASURES}")
    _check_grid(grid, bundle)
    p0 = np.broadcast_to(np.asarray(p0, dtype=float), (bundle.n_paths,))
    if np.any((p0 <= 0) | (p0 >= 1)):
        raise ParameterError("p0 must lie in (0, 1)")
    dt = grid.dt
    out = np.empty((bundle.n_paths, grid.n_steps + 1))
    out[:, 0] = p0
    p = p0.copy()
    clamps = overshoots = 0
    drift = params.q_drift if measure == "Q" else params.eta
    for k in range(grid.n_steps):
        p = p + drift(p) * dt + params.beta(p) * bundle.dW[:, k]
        overshoots += _overshoots(p)
        clamps += _clamp(p, eps)
        out[:, k + 1] = p
    return PosteriorPath(grid, out, bundle.dW, measure, clamps, overshoot_count=overshoots)


@dataclass
class TangentPath:
    grid: TimeGrid
    values: np.ndarray


@dataclass
class MeasureWeight:
    grid: TimeGrid
    values: np.ndarray


def simulate_tangent(posterior: PosteriorPath, bundle: PathBundle,
                     params: MarketParams) -> TangentPath:
    """Tangent process d zeta = zeta Gamma(P) du + zeta Lambda(P) dW_Q,
    integrated in log space so that zeta > 0 pathwise."""
    if posterior.measure != "Q":
        raise ParameterError("the tangent process needs a posterior simulated under Q")
    _check_grid(posterior.grid, bundle)
    P = posterior.values[:, :-1]
    lam = params.dbeta(P)
    dlog = (params.q_drift_slope(P) - 0.5 * lam**2) * posterior.grid.dt + lam * bundle.dW
    logz = np.concatenate([np.zeros((P.shape[0], 1)), np.cumsum(dlog, axis=1)], axis=1)
    return TangentPath(posterior.grid, np.exp(logz))


def measure_weight(posterior: PosteriorPath, bundle: PathBundle,
                   params: MarketParams) -> MeasureWeight:
    """Density process Z = exp(-1/2 int m^2 du - int m dW), m = (theta(P)-r)/sigma."""
    if posterior.measure != "P":
        raise ParameterError("the density process needs a posterior simulated under P")
    _check_grid(posterior.grid, bundle)
    m = params.risk_premium(posterior.values[:, :-1])
    dlog = -0.5 * m**2 * posterior.grid.dt - m * bundle.dW
    logz = np.concatenate([np.zeros((m.shape[0], 1)), np.cumsum(dlog, axis=1)], axis=1)
    return MeasureWeight(posterior.grid, np.exp(logz))


def simulate_chain(grid: TimeGrid, q1: float, q2: float, initial_state: int,
                   seed: int, realization: int = 0, n_paths: int = 1,
                   purpose="chain") -> np.ndarray:
    """Two-state chain sampled exactly in event times, then read off at the
    grid times. Returns int8 states in {1, 2}, shape (n_paths, n_steps + 1)."""
    if q1 <= 0 or q2 <= 0:
        raise ParameterError("chain rates must be > 0")
    if initial_state not in (1, 2):
        raise ParameterError("initial_state must be 1 or 2")
    rng = make_rng(seed, realization, purpose)
    times = grid.times
    states = np.empty((n_paths, times.size), dtype=np.int8)
    rates = (q1, q2) if initial_state == 1 else (q2, q1)
    mean_hold = 0.5 * (1.0 / q1 + 1.0 / q2)
    chunk = int(2 * ((grid.T - grid.t0) / mean_hold) + 64)
    for j in range(n_paths):
        holds = []
        total = 0.0
        while total <= grid.T - grid.t0:
            # holding times alternate between the two states, starting in initial_state
            h = rng.exponential(1.0, size=2 * chunk).reshape(chunk, 2) / rates
            holds.append(h.ravel())
            total += h.sum()
        jump_times = grid.t0 + np.cumsum(np.concatenate(holds))
        n_jumps = np.searchsorted(jump_times, times, side="right")
        states[j] = np.where(n_jumps % 2 == 0, initial_state, 3 - initial_state)
    return states
