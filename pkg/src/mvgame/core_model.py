"""Market and investor parameters, equilibrium constants, and the scalar
model functions of the filtered market.

The filtered stock drift is ``theta(p) = (mu1 - mu2) p + mu2``, the filter
diffusion is ``beta(p) = (mu1 - mu2)/sigma * p (1 - p)`` and, when the drift
alternates on a hidden two-state chain, the filter picks up the mean-reverting
drift ``eta(p) = -(q1 + q2) p + q2``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

CONSTANT = "constant"
ALTERNATING = "alternating"


class ParameterError(ValueError):
    """Raised when a parameter set violates its invariants."""


class NumericalError(RuntimeError):
    """Raised when a solver or estimator produces non-finite or unstable output."""


@dataclass(frozen=True)
class MarketParams:
    """Riskfree rate, stock coefficients and the drift regime.

    ``mode`` is ``"constant"`` (the drift is an unknown constant, equal to
    ``mu1`` when ``state == 1`` and ``mu2`` when ``state == 2``) or
    ``"alternating"`` (the drift follows a two-state Markov chain started in
    ``state``; ``q1`` is the rate of leaving state 1, ``q2`` of leaving 2).
    """

    r: float
    sigma: float
    mu1: float
    mu2: float
    T: float
    mode: str = CONSTANT
    state: int = 1
    q1: float = 0.0
    q2: float = 0.0

    def __post_init__(self):
        for name in ("r", "sigma", "mu1", "mu2", "T", "q1", "q2"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if self.T <= 0:
            raise ParameterError(f"T must be > 0, got {self.T}")
        if self.mu1 < self.mu2:
            raise ParameterError(f"need mu1 >= mu2, got mu1={self.mu1}, mu2={self.mu2}")
        if self.mode not in (CONSTANT, ALTERNATING):
            raise ParameterError(f"mode must be 'constant' or 'alternating', got {self.mode!r}")
        if self.state not in (1, 2):
            raise ParameterError(f"state must be 1 or 2, got {self.state}")
        if self.mode == ALTERNATING and (self.q1 <= 0 or self.q2 <= 0):
            raise ParameterError("alternating mode needs q1 > 0 and q2 > 0")

    @property
    def alternating(self) -> bool:
        return self.mode == ALTERNATING

    @property
    def true_mu(self) -> float:
        """Drift in ``state`` (the true constant, or the chain's initial drift)."""
        return self.mu1 if self.state == 1 else self.mu2

    def mu_of(self, m):
        return np.where(np.asarray(m) == 1, self.mu1, self.mu2)

    # Unchecked vectorised model functions, used inside simulation loops.
    def theta(self, p):
        return (self.mu1 - self.mu2) * p + self.mu2

    def beta(self, p):
        return (self.mu1 - self.mu2) / self.sigma * p * (1.0 - p)

    def eta(self, p):
        if self.alternating:
            return -(self.q1 + self.q2) * p + self.q2
        return np.zeros_like(np.asarray(p, dtype=float))

    def risk_premium(self, p):
        """Market price of risk ``(theta(p) - r) / sigma``."""
        return (self.theta(p) - self.r) / self.sigma

    def dbeta(self, p):
        return (self.mu1 - self.mu2) / self.sigma * (1.0 - 2.0 * p)

    def deta(self):
        return -(self.q1 + self.q2) if self.alternating else 0.0

    def q_drift(self, p):
        """Drift of the filter under the risk-neutral measure Q."""
        return self.eta(p) - self.beta(p) * self.risk_premium(p)

    def q_drift_slope(self, p):
        """d/dp of :meth:`q_drift`; the drift rate of the tangent process."""
        return (
            self.deta()
            - self.dbeta(p) * self.risk_premium(p)
            - self.beta(p) * (self.mu1 - self.mu2) / self.sigma
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class InvestorParams:
    gamma: float
    lambda_m: float
    lambda_v: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f"gamma must be > 0, got {self.gamma}")
        if not 0 < self.lambda_m < 1:
            raise ParameterError(f"lambda_m must lie in (0, 1), got {self.lambda_m}")
        if not 0 <= self.lambda_v < 1:
            raise ParameterError(f"lambda_v must lie in [0, 1), got {self.lambda_v}")


@dataclass(frozen=True)
class EquilibriumCoefficients:
    """Per-investor constants shared by every equilibrium formula."""

    kappa: np.ndarray
    kappa_bar: float
    lambda_v_bar: float
    gamma: np.ndarray = field(repr=False)
    lambda_m: np.ndarray = field(repr=False)
    lambda_v: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return len(self.kappa)

    @property
    def relative_weight(self) -> np.ndarray:
        """``lambda_v_i / (1 - lambda_v_bar)``, the weight on the population term."""
        return self.lambda_v / (1.0 - self.lambda_v_bar)

    @property
    def mean_gap_weight(self) -> np.ndarray:
        """``(lambda_v_i - lambda_m_i) / (1 - lambda_v_bar)``."""
        return (self.lambda_v - self.lambda_m) / (1.0 - self.lambda_v_bar)

    @property
    def effective_kappa(self) -> np.ndarray:
        """``kappa_i + lambda_v_i / (1 - lambda_v_bar) * kappa_bar``."""
        return self.kappa + self.relative_weight * self.kappa_bar


def compute_coefficients(investors: Sequence[InvestorParams]) -> EquilibriumCoefficients:
    """Compute kappa_i, their mean, and the mean variance weight.

    kappa_i = (1/gamma_i) (1 - lambda_v_i/N)^-1 (1 - lambda_m_i/N).
    """
    investors = list(investors)
    n = len(investors)
    if n == 0:
        raise ParameterError("need at least one investor")
    gamma = np.array([inv.gamma for inv in investors], dtype=float)
    lam_m = np.array([inv.lambda_m for inv in investors], dtype=float)
    lam_v = np.array([inv.lambda_v for inv in investors], dtype=float)
    kappa = (1.0 - lam_m / n) / ((1.0 - lam_v / n) * gamma)
    lambda_v_bar = float(lam_v.mean())
    if lambda_v_bar >= 1:
        raise ParameterError("mean lambda_v must be < 1")
    for arr in (kappa, gamma, lam_m, lam_v):
        arr.setflags(write=False)
    return EquilibriumCoefficients(
        kappa=kappa,
        kappa_bar=float(kappa.mean()),
        lambda_v_bar=lambda_v_bar,
        gamma=gamma,
        lambda_m=lam_m,
        lambda_v=lam_v,
    )


def model_functions(p, params: MarketParams):
    """Return ``(theta(p), beta(p), eta(p))``; ``p`` may be a scalar or array."""
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0) or np.any(arr > 1):
        raise ParameterError("p must lie in [0, 1]")
    out = params.theta(arr), params.beta(arr), params.eta(arr)
    if arr.ndim == 0:
        return tuple(float(v) for v in out)
    return out


def params_hash(*objects) -> str:
    """Short content hash of JSON-serialisable parameter objects."""
    payload = json.dumps([_plain(o) for o in objects], sort_keys=True, default=_plain)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _plain(obj):
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_plain(o) for o in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
