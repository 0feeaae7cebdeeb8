"""The two degenerate Cauchy problems behind the partial-information
equilibrium.

The first problem (one per investor) has the representation
``c_i(t, p) = kappa_i E_Q[int_t^T m(P)^2 du]`` with market price of risk
``m(p) = (theta(p) - r)/sigma``, and its slope
``dc_i/dp = (2 kappa_i/sigma^2)(mu1 - mu2) E_Q[int_t^T zeta (theta(P) - r) du]``.
Both are linear in ``kappa_i``, so tables store one base integral ``H``
(``c_i = kappa_i H``) and one base slope ``G`` (``dc_i/dp = kappa_i G``).
The filter dynamics do not depend on ``t``, so a single set of paths
started at ``p`` at time 0 gives every ``t``-node: ``c(t, p)`` only depends
on ``T - t``.

The second problem ``C_i`` has a source ``R_i`` that couples investors
through ``mean(dc/dp)``. See :func:`source_term` for the implemented
variants.
"""

from __future__ import annotations

import json
import logging
import math
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numba import njit
from scipy.linalg import solve_banded
from scipy.special import expit, logit

from mvgame.core_model import (
    EquilibriumCoefficients,
    MarketParams,
    NumericalError,
    ParameterError,
    params_hash,
)
from mvgame.stochastic_engine import EPS_CLAMP, make_rng

log = logging.getLogger(__name__)

SOURCE_VARIANTS = ("derived", "paper_plus", "paper_minus")
TABLE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings for the Cauchy estimators.

    Nodes share one Q-stream (and one P-stream), so estimates at nearby
    ``p`` use common random numbers; this smooths tables in ``p`` and makes
    finite differences of :func:`estimate_c` low-variance.
    """

    n_paths_c: int = 10_000
    n_paths_dc: int = 20_000
    n_paths_C: int = 4_000
    dt: float = 0.01
    seed: int = 20240101
    eps: float = EPS_CLAMP
    threads: int = 1

    def __post_init__(self):
        for name in ("n_paths_c", "n_paths_dc", "n_paths_C", "threads"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1")
        if not self.dt > 0:
            raise ParameterError("dt must be > 0")


# ---------------------------------------------------------------------------
# Monte Carlo kernels
# ---------------------------------------------------------------------------


def _mean_se(x: np.ndarray, axis: int = -1):
    n = x.shape[axis]
    mean = x.mean(axis=axis)
    se = x.std(axis=axis, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


@njit(cache=True, nogil=True)
def _q_step(p, L, log_zeta, I_m2, I_z, dW, dt, k, m0, q1, q2, alternating, tangent, eps):
    """One Euler step under Q for every (node, path); returns the clamp count.

    With ``k = (mu1 - mu2)/sigma``: ``m = k p + m0``, ``beta = k p (1 - p)``,
    ``Lambda = k (1 - 2p)``, ``Gamma = eta' - Lambda m - beta k``.
    For a constant drift the filter is stepped in log-odds ``L``, whose
    drift ``-k (m0 + k/2)`` and diffusion ``k`` are constant, so the step
    is exact; in alternating mode it is stepped in ``p``.
    """
    clamps = 0
    deta = -(q1 + q2) if alternating else 0.0
    a_L = -k * (m0 + 0.5 * k)
    for a in range(p.shape[0]):
        for j in range(p.shape[1]):
            x = p[a, j]
            m = k * x + m0
            I_m2[a, j] += m * m * dt
            beta = k * x * (1.0 - x)
            if tangent:
                I_z[a, j] += math.exp(log_zeta[a, j]) * m * dt
                lam = k * (1.0 - 2.0 * x)
                log_zeta[a, j] += (deta - lam * m - beta * k - 0.5 * lam * lam) * dt + lam * dW[j]
            if alternating:
                x = x + ((q2 - (q1 + q2) * x) - beta * m) * dt + beta * dW[j]
            else:
                L[a, j] += a_L * dt + k * dW[j]
                x = 1.0 / (1.0 + math.exp(-L[a, j]))
            if x < eps:
                x = eps
                clamps += 1
            elif x > 1.0 - eps:
                x = 1.0 - eps
                clamps += 1
            p[a, j] = x
    return clamps


def _q_integrals(p0, n_steps: int, dt: float, params: MarketParams, n_paths: int,
                 rng: np.random.Generator, checkpoints: np.ndarray, eps: float,
                 tangent: bool, n_c: int):
    """Simulate P under Q from each start in ``p0`` (and the tangent process)
    and return the mean and SE of the running integrals of ``m(P)^2`` and
    ``zeta (theta(P) - r)`` at the given step counts, shape ``(n_ck, n_nodes)``.
    All starts share the same increments."""
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    n_nodes = len(p0)
    p = np.repeat(p0[:, None], n_paths, axis=1)
    L = logit(p)
    log_zeta = np.zeros_like(p)
    I_m2 = np.zeros_like(p)
    I_z = np.zeros_like(p)
    n_ck = len(checkpoints)
    out = {key: np.zeros((n_ck, n_nodes)) for key in ("H", "se_H", "J", "se_J")}
    k = (params.mu1 - params.mu2) / params.sigma
    m0 = (params.mu2 - params.r) / params.sigma
    clamps = 0
    sqdt = math.sqrt(dt)

    def record(ck):
        out["H"][ck], out["se_H"][ck] = _mean_se(I_m2[:, :n_c])
        if tangent:
            J, se = _mean_se(I_z)
            out["J"][ck], out["se_J"][ck] = params.sigma * J, params.sigma * se

    ck = 0
    while ck < n_ck and checkpoints[ck] == 0:
        record(ck)
        ck += 1
    for step in range(n_steps):
        dW = rng.standard_normal(n_paths) * sqdt
        clamps += _q_step(p, L, log_zeta, I_m2, I_z, dW, dt, k, m0, params.q1, params.q2,
                          params.alternating, tangent, eps)
        while ck < n_ck and checkpoints[ck] == step + 1:
            record(ck)
            ck += 1
    if not np.all(np.isfinite(I_m2)) or (tangent and not np.all(np.isfinite(I_z))):
        raise NumericalError(f"non-finite path integral from p in {p0.tolist()}")
    out["clamps"] = clamps
    out["I_m2"] = I_m2
    return out


def _steps_for(tau: float, dt: float) -> int:
    return max(1, int(round(tau / dt)))


def _check_node(t, p, params):
    if not 0 <= t <= params.T:
        raise ParameterError(f"t must lie in [0, T], got {t}")
    if not 0 < p < 1:
        raise ParameterError(f"p must lie in (0, 1), got {p}")


def estimate_c(t: float, p: float, i: int, params: MarketParams,
               coeffs: EquilibriumCoefficients, mc: MCConfig = MCConfig()):
    """``(value, standard error)`` of ``c_i(t, p)`` by Monte Carlo under Q."""
    _check_node(t, p, params)
    tau = params.T - t
    if tau == 0:
        return 0.0, 0.0
    n = _steps_for(tau, mc.dt)
    rng = make_rng(mc.seed, 0, "cauchy_Q")
    res = _q_integrals(p, n, tau / n, params, mc.n_paths_c, rng, np.array([n]), mc.eps,
                       False, mc.n_paths_c)
    k = coeffs.kappa[i]
    return float(k * res["H"][0, 0]), float(k * res["se_H"][0, 0])


def _slope_factor(params: MarketParams) -> float:
    return 2.0 * (params.mu1 - params.mu2) / params.sigma**2


def estimate_dc_dp(t: float, p: float, i: int, params: MarketParams,
                   coeffs: EquilibriumCoefficients, mc: MCConfig = MCConfig()):
    """``(value, standard error)`` of ``dc_i/dp(t, p)`` via the tangent process."""
    _check_node(t, p, params)
    tau = params.T - t
    if tau == 0 or params.mu1 == params.mu2:
        return 0.0, 0.0
    n = _steps_for(tau, mc.dt)
    rng = make_rng(mc.seed, 0, "cauchy_Q")
    res = _q_integrals(p, n, tau / n, params, mc.n_paths_dc, rng, np.array([n]), mc.eps,
                       True, mc.n_paths_dc)
    scale = coeffs.kappa[i] * _slope_factor(params)
    return float(scale * res["J"][0, 0]), float(abs(scale) * res["se_J"][0, 0])


def fd_dc_dp(t: float, p: float, i: int, params: MarketParams,
             coeffs: EquilibriumCoefficients, mc: MCConfig = MCConfig(), h: float = 1e-3):
    """Central difference of :func:`estimate_c` with common random numbers.

    Returns ``(value, standard error)``; the SE comes from the per-path
    differences, which share every increment.
    """
    _check_node(t, p, params)
    tau = params.T - t
    if tau == 0:
        return 0.0, 0.0
    n = _steps_for(tau, mc.dt)
    rng = make_rng(mc.seed, 0, "cauchy_Q")
    res = _q_integrals([p + h, p - h], n, tau / n, params, mc.n_paths_c, rng, np.array([n]),
                       mc.eps, False, mc.n_paths_c)
    sums = res["I_m2"]
    diff = coeffs.kappa[i] * (sums[0] - sums[1]) / (2 * h)
    mean, se = _mean_se(diff)
    return float(mean), float(se)


# ---------------------------------------------------------------------------
# Source term of the second problem
# ---------------------------------------------------------------------------


def _variant_weights(variant: str, coeffs: EquilibriumCoefficients):
    """Return ``(s, a, b)`` for ``R_i`` in the general form below."""
    if variant not in SOURCE_VARIANTS:
        raise ParameterError(f"source variant must be one of {SOURCE_VARIANTS}")
    if variant == "derived":
        return 1.0, np.ones(coeffs.N), np.zeros(coeffs.N)
    lv, n = coeffs.lambda_v, coeffs.N
    a = 1.0 - 2.0 * lv / n
    b = 2.0 * lv / (1.0 - coeffs.lambda_v_bar) * (1.0 - lv / n)
    return (1.0 if variant == "paper_plus" else -1.0), a, b


def source_term(p, hedge, i: int, params: MarketParams, coeffs: EquilibriumCoefficients,
                variant: str = "derived"):
    """Source ``R_i`` of the second Cauchy problem.

    ``hedge`` is ``beta(p) G`` with ``G`` the base slope, so
    ``beta dc_j/dp = kappa_j hedge`` for every investor. With
    ``u = (theta - r)/sigma^2 - hedge / sigma`` the own and population
    brackets are ``phi_i = kappa_i u`` and ``kappa_bar u``, and

        R_i = (theta - r)(phi_i + s w_i kappa_bar u)
              - (gamma_i sigma^2 / 2)(a_i phi_i + b_i kappa_bar u)^2
              - (gamma_i / 2)(beta dc_i)^2 - gamma_i sigma (beta dc_i) phi_i

    with ``w_i`` the mean-gap weight. ``"derived"`` uses ``s=1, a=1, b=0``,
    which collapses the variance part to ``(gamma_i/2) kappa_i^2 m^2``.
    ``"paper_plus"``/``"paper_minus"`` use the published bracket weights
    ``a_i = 1 - 2 lv_i/N``, ``b_i = 2 lv_i/(1 - lv_bar)(1 - lv_i/N)`` with
    ``s = +1`` or ``s = -1``.
    """
    s, a, b = _variant_weights(variant, coeffs)
    theta_r = params.theta(p) - params.r
    sig = params.sigma
    u = theta_r / sig**2 - hedge / sig
    k_i, kb = coeffs.kappa[i], coeffs.kappa_bar
    g_i = coeffs.gamma[i]
    phi = k_i * u
    bdc = k_i * hedge
    mean_part = theta_r * (phi + s * coeffs.mean_gap_weight[i] * kb * u)
    var_part = (0.5 * g_i * sig**2 * (a[i] * phi + b[i] * kb * u) ** 2
                + 0.5 * g_i * bdc**2 + g_i * sig * bdc * phi)
    return mean_part - var_part


def constant_source(i: int, params: MarketParams, coeffs: EquilibriumCoefficients,
                    mu: float, variant: str = "derived") -> float:
    """``R_i`` with full information and drift ``mu`` (no filter terms).

    For a constant drift this is the per-unit-time value ``N_i`` and in the
    regime-switching model it is ``Q_i^m`` with ``mu = mu(m)``.
    """
    pseudo = replace(params, mu1=mu, mu2=mu, mode="constant", q1=0.0, q2=0.0)
    return float(source_term(0.5, 0.0, i, pseudo, coeffs, variant))


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


@dataclass
class CauchyTable:
    """Values of ``c_i``, ``dc_i/dp`` and ``C_i`` on a rectilinear
    ``(t, p)`` grid. Arrays have shape ``(N, n_t, n_p)``; ``i`` is 0-based.
    """

    t: np.ndarray
    p: np.ndarray
    c: np.ndarray
    dc_dp: np.ndarray | None = None
    C: np.ndarray | None = None
    se_c: np.ndarray | None = None
    se_dc: np.ndarray | None = None
    se_C: np.ndarray | None = None
    beta_scale: float | None = None
    provenance: dict = field(default_factory=dict)
    clamp_warnings: int = 0

    @property
    def N(self) -> int:
        return self.c.shape[0]

    @property
    def dc_dp_bar(self) -> np.ndarray:
        return self.dc_dp.mean(axis=0)

    @property
    def x(self) -> np.ndarray:
        """Log-odds of the ``p``-nodes; the interpolation coordinate."""
        return logit(self.p)

    def _locate(self, t, p, warn: bool = True):
        t = np.asarray(t, dtype=float)
        p = np.asarray(p, dtype=float)
        lo, hi = self.p[0], self.p[-1]
        outside = (p < lo) | (p > hi)
        if np.any(outside):
            if warn:
                if self.clamp_warnings == 0:
                    log.warning("p query outside table range [%g, %g]; clamping to the edge",
                                lo, hi)
                self.clamp_warnings += int(np.count_nonzero(outside))
            p = np.clip(p, lo, hi)
        x = logit(p)
        xs = self.x
        t = np.clip(t, self.t[0], self.t[-1])
        it = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        ip = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(xs) - 2)
        wt = (t - self.t[it]) / (self.t[it + 1] - self.t[it])
        wp = np.clip((x - xs[ip]) / (xs[ip + 1] - xs[ip]), 0.0, 1.0)
        return it, ip, wt, wp, p

    @staticmethod
    def _bilinear(arr, it, ip, wt, wp):
        return ((1 - wt) * (1 - wp) * arr[:, it, ip] + (1 - wt) * wp * arr[:, it, ip + 1]
                + wt * (1 - wp) * arr[:, it + 1, ip] + wt * wp * arr[:, it + 1, ip + 1])

    def interp(self, name: str, t, p, i: int | None = None, warn: bool = True):
        """Bilinear interpolation in ``(t, logit p)`` of field ``name``.

        ``name`` is ``"c"``, ``"C"``, ``"dc_dp"`` or ``"hedge"``
        (``beta(p) dc/dp``). Slopes grow like ``1/(p(1-p))`` near the edges,
        so they are interpolated as ``p(1-p) dc/dp``, which stays bounded.
        Returns values for investor ``i``, or for every investor stacked on a
        leading axis when ``i`` is ``None``. Queries outside the
        ``p``-range clamp to the nearest edge and log a warning once per table.
        """
        field_name = "dc_dp" if name in ("dc_dp", "hedge") else name
        arr = getattr(self, field_name, None)
        if arr is None:
            raise ParameterError(f"table has no {field_name!r} field")
        if i is not None:
            arr = arr[i : i + 1]
        it, ip, wt, wp, pc = self._locate(t, p, warn)
        if field_name == "dc_dp":
            w = self.p * (1 - self.p)
            v = self._bilinear(arr * w[None, None, :], it, ip, wt, wp)
            if name == "dc_dp":
                v = v / (pc * (1 - pc))
            else:
                v = v * self._beta_scale
        else:
            v = self._bilinear(arr, it, ip, wt, wp)
        return v[0] if i is not None else v

    @property
    def _beta_scale(self) -> float:
        # hedge = beta(p) dc/dp = k p(1-p) dc/dp with k = (mu1 - mu2)/sigma
        if self.beta_scale is None:
            raise ParameterError("table has no beta_scale; cannot form the hedge term")
        return self.beta_scale

    def base_slope_table(self, kappa) -> "CauchyTable":
        """Single-layer table of the base slope ``mean_i(dc_i/dp / kappa_i)``."""
        G = (self.dc_dp / np.asarray(kappa)[:, None, None]).mean(axis=0)
        return CauchyTable(self.t, self.p, G[None] * 0, dc_dp=G[None], beta_scale=self.beta_scale)

    def max_abs_dc_dp(self) -> float:
        return float(np.max(np.abs(self.dc_dp))) if self.dc_dp is not None else float("nan")

    # serialisation ---------------------------------------------------------

    def to_csv(self, path) -> None:
        """Header lines ``# {json}`` then rows
        ``t,p,i,c,dc_dp,C,se_c,se_dc,se_C`` with 1-based ``i``."""
        header = {
            "schema_version": TABLE_SCHEMA_VERSION,
            "t": self.t.tolist(),
            "p": self.p.tolist(),
            "N": self.N,
            "beta_scale": self.beta_scale,
            "provenance": self.provenance,
        }
        nan = np.full(self.c.shape, np.nan)
        cols = [self.c, self.dc_dp, self.C, self.se_c, self.se_dc, self.se_C]
        cols = [nan if a is None else a for a in cols]
        I, Tm, Pm = np.meshgrid(np.arange(self.N), self.t, self.p, indexing="ij")
        data = np.column_stack([Tm.ravel(), Pm.ravel(), I.ravel() + 1] + [a.ravel() for a in cols])
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            fh.write("t,p,i,c,dc_dp,C,se_c,se_dc,se_C\n")
            np.savetxt(fh, data, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "CauchyTable":
        with open(path) as fh:
            header = json.loads(fh.readline()[2:])
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        t, p = np.array(header["t"]), np.array(header["p"])
        shape = (header["N"], len(t), len(p))
        cols = [data[:, k].reshape(shape) for k in range(3, 9)]
        cols = [None if np.all(np.isnan(a)) else a for a in cols]
        return cls(t, p, *cols, beta_scale=header.get("beta_scale"),
                   provenance=header["provenance"])


def default_t_nodes(T: float, n_t: int = 64) -> np.ndarray:
    return np.linspace(0.0, T, n_t)


EDGE_LOGITS = (5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0, 19.0, 21.0)


def default_p_nodes(n_p: int = 41, edge_logits=EDGE_LOGITS) -> np.ndarray:
    """``n_p`` uniform nodes on ``[0.01, 0.99]`` plus edge nodes at
    ``logit(p) = +/- edge_logits``.

    The filter spends long stretches outside ``[0.01, 0.99]`` once it has
    learned the drift, and the hedge term ``beta dc/dp`` does not vanish
    there; the edge nodes keep the table accurate where the paths go.
    Pass ``edge_logits=()`` for the core grid only.
    """
    core = np.linspace(0.01, 0.99, n_p)
    edges = np.asarray(edge_logits, dtype=float)
    return np.sort(np.concatenate([expit(-edges), core, expit(edges)]))


P_NODE_MIN = float(expit(-25.0))


def _check_grids(t_nodes, p_nodes, params):
    t_nodes = np.asarray(t_nodes, dtype=float)
    p_nodes = np.asarray(p_nodes, dtype=float)
    if len(t_nodes) < 2 or len(p_nodes) < 2:
        raise ParameterError("need at least two nodes per axis")
    if np.any(np.diff(t_nodes) <= 0) or np.any(np.diff(p_nodes) <= 0):
        raise ParameterError("grid nodes must be strictly increasing")
    if abs(t_nodes[-1] - params.T) > 1e-12 or t_nodes[0] < 0:
        raise ParameterError("t-grid must lie in [0, T] and end at T")
    core = (p_nodes >= 0.01 - 1e-12) & (p_nodes <= 0.99 + 1e-12)
    if core.sum() < 2:
        raise ParameterError("need at least two p-nodes within [0.01, 0.99]")
    if np.any(p_nodes < P_NODE_MIN) or np.any(p_nodes > 1 - P_NODE_MIN):
        raise ParameterError("edge p-nodes must satisfy |logit(p)| <= 25")
    dtn = np.diff(t_nodes)
    if not np.allclose(dtn, dtn[0]):
        raise ParameterError("t-grid must be uniform")
    return t_nodes, p_nodes


def base_tables(params: MarketParams, t_nodes, p_nodes, mc: MCConfig = MCConfig()):
    """Base integrals ``H`` and base slopes ``G`` with standard errors,
    shape ``(n_t, n_p)`` each, plus the clamp count."""
    t_nodes, p_nodes = _check_grids(t_nodes, p_nodes, params)
    n_int = len(t_nodes) - 1
    span = t_nodes[-1] - t_nodes[0]
    sub = max(1, int(math.ceil(span / n_int / mc.dt)))
    dt = span / (n_int * sub)
    checkpoints = np.arange(n_int + 1) * sub
    tangent = params.mu1 != params.mu2
    n_paths = max(mc.n_paths_c, mc.n_paths_dc) if tangent else mc.n_paths_c

    def run(block):
        rng = make_rng(mc.seed, 0, "cauchy_Q")
        return _q_integrals(block, n_int * sub, dt, params, n_paths, rng, checkpoints, mc.eps,
                            tangent, mc.n_paths_c)

    blocks = np.array_split(p_nodes, min(mc.threads, len(p_nodes)))
    if len(blocks) > 1:
        with ThreadPoolExecutor(len(blocks)) as ex:
            results = list(ex.map(run, blocks))
    else:
        results = [run(blocks[0])]
    fac = _slope_factor(params)
    # checkpoint j covers tau = T - t_{n_t - 1 - j}, hence the row reversal
    H = np.concatenate([r["H"] for r in results], axis=1)[::-1]
    se_H = np.concatenate([r["se_H"] for r in results], axis=1)[::-1]
    G = fac * np.concatenate([r["J"] for r in results], axis=1)[::-1]
    se_G = abs(fac) * np.concatenate([r["se_J"] for r in results], axis=1)[::-1]
    clamps = sum(r["clamps"] for r in results)
    return H, se_H, G, se_G, clamps


def build_tables(params: MarketParams, coeffs: EquilibriumCoefficients, t_nodes=None,
                 p_nodes=None, mc: MCConfig = MCConfig(), C_method: str = "fd",
                 variant: str = "derived", fd_space: int | None = None) -> CauchyTable:
    """Fill ``c_i`` and ``dc_i/dp`` at every node by Monte Carlo, then ``C_i``.

    ``C_method`` picks how ``C_i`` is filled: ``"fd"`` (default, the
    full-domain scheme of :func:`solve_second_cauchy`), ``"mc"`` (direct
    simulation at every node; slow), or ``None`` to skip.
    """
    t_nodes = default_t_nodes(params.T) if t_nodes is None else t_nodes
    p_nodes = default_p_nodes() if p_nodes is None else p_nodes
    H, se_H, G, se_G, clamps = base_tables(params, t_nodes, p_nodes, mc)
    k = coeffs.kappa[:, None, None]
    table = CauchyTable(
        t=np.asarray(t_nodes, dtype=float),
        p=np.asarray(p_nodes, dtype=float),
        c=k * H,
        dc_dp=k * G,
        se_c=k * se_H,
        se_dc=k * se_G,
        beta_scale=(params.mu1 - params.mu2) / params.sigma,
        provenance={
            "method": "mc",
            "params_hash": params_hash(params, coeffs),
            "market": params.to_dict(),
            "mc": asdict(mc),
            "clamps": clamps,
            "C_method": C_method,
            "variant": variant,
        },
    )
    if np.any(~np.isfinite(table.c)) or np.any(~np.isfinite(table.dc_dp)):
        bad = np.argwhere(~np.isfinite(H) | ~np.isfinite(G))[0]
        raise NumericalError(f"non-finite table entry at t={t_nodes[bad[0]]}, p={p_nodes[bad[1]]}")
    if C_method is not None:
        solve_second_cauchy(params, coeffs, table, method=C_method, variant=variant,
                            mc=mc, fd_space=fd_space)
    return table


def table_cache_key(params: MarketParams, coeffs: EquilibriumCoefficients, t_nodes, p_nodes,
                    mc: MCConfig, C_method, variant: str) -> str:
    """Content hash of everything a table depends on. The thread count is
    excluded: every node block replays the same stream."""
    mc_fields = {k: v for k, v in asdict(mc).items() if k != "threads"}
    return params_hash(TABLE_SCHEMA_VERSION, params, coeffs, np.asarray(t_nodes, dtype=float),
                       np.asarray(p_nodes, dtype=float), mc_fields, C_method, variant)


def load_or_build_tables(params: MarketParams, coeffs: EquilibriumCoefficients, cache_dir=None,
                         t_nodes=None, p_nodes=None, mc: MCConfig = MCConfig(),
                         C_method: str = "fd", variant: str = "derived"):
    """:func:`build_tables` behind an on-disk cache keyed by
    :func:`table_cache_key`. Returns ``(table, path or None, hit)``."""
    t_nodes = default_t_nodes(params.T) if t_nodes is None else t_nodes
    p_nodes = default_p_nodes() if p_nodes is None else p_nodes
    path = None
    if cache_dir is not None:
        key = table_cache_key(params, coeffs, t_nodes, p_nodes, mc, C_method, variant)
        path = pathlib.Path(cache_dir) / f"table_{key}.csv"
        if path.exists():
            return CauchyTable.from_csv(path), path, True
    table = build_tables(params, coeffs, t_nodes, p_nodes, mc, C_method, variant)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        table.to_csv(tmp)
        tmp.replace(path)
    return table, path, False


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def _operator_bands(p, drift, diff2, boundary: str, upwind: str):
    """Tridiagonal coefficients (lower, diag, upper) of
    ``L u = drift u_p + diff2/2 u_pp`` on a uniform grid ``p``.

    ``boundary``: ``"zero"`` (zero Dirichlet data), ``"frozen"`` (the edge
    value only accrues the source, as if the state stopped there) or
    ``"degenerate"`` (diffusion vanishes at the edge; one-sided inward drift).
    """
    h = p[1] - p[0]
    a = drift(p)
    d = 0.5 * diff2(p)
    n = len(p)
    lo, di, up = np.zeros(n), np.zeros(n), np.zeros(n)
    central = np.ones(n, dtype=bool)
    if upwind == "auto":
        with np.errstate(divide="ignore", invalid="ignore"):
            central = np.abs(a) * h <= 2 * d
    # central differences
    lo_c = d / h**2 - a / (2 * h)
    up_c = d / h**2 + a / (2 * h)
    # first-order upwind for the drift
    lo_u = d / h**2 + np.maximum(-a, 0) / h
    up_u = d / h**2 + np.maximum(a, 0) / h
    lo[:] = np.where(central, lo_c, lo_u)
    up[:] = np.where(central, up_c, up_u)
    di[:] = -(lo + up)
    if boundary in ("zero", "frozen"):
        lo[0] = di[0] = up[0] = 0.0
        lo[-1] = di[-1] = up[-1] = 0.0
    elif boundary == "degenerate":
        # degenerate edges: diffusion vanishes, one-sided drift pointing inward
        lo[0], up[0] = 0.0, max(a[0], 0.0) / h
        di[0] = -up[0]
        up[-1], lo[-1] = 0.0, max(-a[-1], 0.0) / h
        di[-1] = -lo[-1]
    else:
        raise ParameterError(f"unknown boundary rule {boundary!r}")
    return lo, di, up


def _cn_backward(p, t_levels, drift, diff2, source, boundary: str, upwind: str = "auto"):
    """Crank-Nicolson march from ``u(T) = 0`` back over ``t_levels``
    (increasing). ``source(t, p)`` is the forcing. Returns ``(n_t, n_p)``."""
    lo, di, up = _operator_bands(p, drift, diff2, boundary, upwind)
    n = len(p)
    out = np.zeros((len(t_levels), n))
    u = np.zeros(n)
    f_next = source(t_levels[-1], p)
    for k in range(len(t_levels) - 2, -1, -1):
        dt = t_levels[k + 1] - t_levels[k]
        f_now = source(t_levels[k], p)
        rhs = u + 0.5 * dt * (di * u + f_now + f_next)
        rhs[1:] += 0.5 * dt * lo[1:] * u[:-1]
        rhs[:-1] += 0.5 * dt * up[:-1] * u[1:]
        ab = np.zeros((3, n))
        ab[0, 1:] = -0.5 * dt * up[:-1]
        ab[1] = 1.0 - 0.5 * dt * di
        ab[2, :-1] = -0.5 * dt * lo[1:]
        if boundary == "zero":
            rhs[0] = rhs[-1] = 0.0
        u = solve_banded((1, 1), ab, rhs)
        out[k] = u
        f_next = f_now
    return out


def _instability_check(values, t_levels, sup_source, label):
    bound = (t_levels[-1] - t_levels)[:, None] * sup_source
    excess = np.abs(values) - 1.1 * bound
    if not np.all(np.isfinite(values)) or np.any(excess > 1e-12):
        k, j = np.unravel_index(np.nanargmax(np.where(np.isfinite(excess), excess, np.inf)),
                                values.shape)
        raise NumericalError(
            f"{label}: unstable FD solution, |u|={abs(values[k, j]):.4g} exceeds "
            f"1.1 x bound {bound[k, 0]:.4g} at t-level {k}, node {j}")


def solve_cauchy_fd(i: int, params: MarketParams, coeffs: EquilibriumCoefficients,
                    n: int | None = 64, n_space: int = 512, n_time: int = 1000,
                    t_out=None, upwind: str = "auto") -> CauchyTable:
    """Crank-Nicolson solution of the first problem.

    With an integer ``n`` the problem is posed on ``(1/n, 1 - 1/n)`` with zero
    Dirichlet data on the lateral boundary (``n_space`` interior nodes). With
    ``n=None`` the full interval ``[0, 1]`` is used; the diffusion vanishes at
    both ends, so no boundary data are imposed there.
    """
    if n is not None and n < 2:
        raise ParameterError("domain index n must be >= 2")
    if n_space < 3:
        raise ParameterError("need at least 3 space nodes")
    lo_p, hi_p = (1.0 / n, 1.0 - 1.0 / n) if n is not None else (0.0, 1.0)
    p = np.linspace(lo_p, hi_p, n_space + 2) if n is not None else np.linspace(0, 1, n_space)
    t_levels = np.linspace(0.0, params.T, n_time + 1)
    k_i = coeffs.kappa[i]

    def src(t, pp):
        return k_i * params.risk_premium(pp) ** 2

    vals = _cn_backward(p, t_levels, params.q_drift, lambda x: params.beta(x) ** 2, src,
                        boundary="zero" if n is not None else "degenerate", upwind=upwind)
    sup = k_i * max((params.mu1 - params.r) ** 2, (params.mu2 - params.r) ** 2) / params.sigma**2
    _instability_check(vals, t_levels, sup, f"first problem (n={n})")
    t_out = default_t_nodes(params.T, 65) if t_out is None else np.asarray(t_out, dtype=float)
    vals_out = _resample_t(vals, t_levels, t_out)
    keep = slice(1, -1) if n is not None else slice(None)
    c = np.zeros((coeffs.N, len(t_out), len(p[keep])))
    c[i] = vals_out[:, keep]
    return CauchyTable(
        t=t_out, p=p[keep], c=c,
        provenance={"method": "fd", "domain_index": n, "n_space": n_space, "n_time": n_time,
                    "investor": i, "params_hash": params_hash(params, coeffs)},
    )


def _resample_t(vals, t_levels, t_out):
    out = np.empty((len(t_out), vals.shape[1]))
    for j in range(vals.shape[1]):
        out[:, j] = np.interp(t_out, t_levels, vals[:, j])
    return out


def solve_second_cauchy(params: MarketParams, coeffs: EquilibriumCoefficients,
                        table: CauchyTable, method: str = "fd", variant: str = "derived",
                        mc: MCConfig = MCConfig(), fd_space: int | None = None,
                        fd_time: int | None = None, investors=None,
                        fd_logit_max: float = 40.0) -> CauchyTable:
    """Fill ``table.C`` (and ``table.se_C`` for Monte Carlo) for the chosen
    investors (default: all).

    ``method="mc"`` averages ``int_t^T R_i du`` along P-measure filter paths
    started at each node, with ``dc/dp`` read from the table. ``method="fd"``
    solves the second problem by Crank-Nicolson: on the full interval
    ``[0, 1]`` in alternating mode, and in log-odds on
    ``[-fd_logit_max, fd_logit_max]`` for a constant unknown drift, where the
    filter diffusion is constant in those coordinates and the learning
    filter spends most of its time near ``p = 0`` or ``1``.
    Requires ``table.dc_dp`` for all investors.
    """
    if table.dc_dp is None or table.dc_dp.shape[0] != coeffs.N:
        raise ParameterError("dc/dp tables for all investors are required")
    investors = range(coeffs.N) if investors is None else investors
    if table.C is None:
        table.C = np.zeros_like(table.c)
    gtab = table.base_slope_table(coeffs.kappa)
    if method == "fd":
        n_time = fd_time or max(200, int(round(params.T / mc.dt)))
        t_levels = np.linspace(table.t[0], params.T, n_time + 1)
        k = (params.mu1 - params.mu2) / params.sigma
        if params.alternating or k == 0:
            # the chain keeps the filter away from the edges: uniform p-grid
            x = np.linspace(0.0, 1.0, fd_space or 512)
            to_p = lambda y: y  # noqa: E731
            drift, diff2, boundary = params.eta, (lambda y: params.beta(y) ** 2), "degenerate"
        else:
            # learning drives the filter to the edges: solve in log-odds
            x = np.linspace(-fd_logit_max, fd_logit_max, fd_space or 801)
            to_p = expit
            drift = lambda y: 0.5 * (2 * expit(y) - 1) * k * k  # noqa: E731
            diff2, boundary = (lambda y: np.full_like(y, k * k)), "frozen"
        pp = to_p(x)
        for i in investors:
            def src(t, _x, i=i):
                return source_term(pp, _hedge(gtab, t, pp), i, params, coeffs, variant)
            sup = np.max(np.abs([src(t, x) for t in t_levels[:: max(1, n_time // 50)]]))
            vals = _cn_backward(x, t_levels, drift, diff2, src, boundary=boundary)
            _instability_check(vals, t_levels, sup * 1.05, f"second problem (i={i})")
            res = _resample_t(vals, t_levels, table.t)
            xq = table.x if to_p is expit else table.p
            for j in range(len(table.t)):
                table.C[i, j] = np.interp(xq, x, res[j])
        table.se_C = None
    elif method == "mc":
        se = np.zeros_like(table.c) if table.se_C is None else table.se_C
        for i in investors:
            for j, t in enumerate(table.t):
                v, s = estimate_C(t, table.p, i, params, coeffs, table, mc, variant)
                table.C[i, j], se[i, j] = v, s
        table.se_C = se
    else:
        raise ParameterError("method must be 'fd' or 'mc'")
    table.provenance = {**table.provenance, "C_method": method, "variant": variant}
    return table


def _hedge(gtab: CauchyTable, t, p):
    """Base hedge term at time ``t``; exact edges p in {0, 1} clamp silently."""
    return gtab.interp("hedge", t, p, 0, warn=False)


def estimate_C(t: float, p, i: int, params: MarketParams, coeffs: EquilibriumCoefficients,
               table: CauchyTable, mc: MCConfig = MCConfig(), variant: str = "derived"):
    """Direct Monte Carlo of ``C_i(t, p)`` for one ``t`` and one or more ``p``.

    Paths follow the filter under P (stepped in log-odds for a constant
    drift, in ``p`` for an alternating one); ``dc/dp`` comes from ``table``.
    Returns
    ``(values, standard errors)`` with the shape of ``p``.
    """
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    tau = params.T - t
    if tau <= 0:
        z = np.zeros(p_arr.shape)
        return (z, z) if np.ndim(p) else (0.0, 0.0)
    if table.dc_dp is None:
        raise ParameterError("estimate_C needs dc/dp tables")
    n = _steps_for(tau, mc.dt)
    dt = tau / n
    gtab = table.base_slope_table(coeffs.kappa)
    rng = make_rng(mc.seed, 0, "cauchy_P")
    n_paths = mc.n_paths_C
    P = np.repeat(p_arr[:, None], n_paths, axis=1)
    L = logit(P)
    kb = (params.mu1 - params.mu2) / params.sigma
    I = np.zeros_like(P)
    sqdt = math.sqrt(dt)
    for k in range(n):
        u = t + k * dt
        I += source_term(P, _hedge(gtab, u, P), i, params, coeffs, variant) * dt
        dW = rng.standard_normal(n_paths) * sqdt
        if params.alternating:
            P = P + params.eta(P) * dt + params.beta(P) * dW[None, :]
        else:
            # log-odds step: drift (P - 1/2) k^2, diffusion k
            L += (P - 0.5) * kb * kb * dt + kb * dW[None, :]
            P = expit(L)
        np.clip(P, mc.eps, 1 - mc.eps, out=P)
    if not np.all(np.isfinite(I)):
        raise NumericalError(f"non-finite C estimate at t={t}")
    mean, se = _mean_se(I)
    if np.ndim(p) == 0:
        return float(mean[0]), float(se[0])
    return mean, se


# ---------------------------------------------------------------------------
# Regime-switching closed forms
# ---------------------------------------------------------------------------


def _two_state_integral(tau, m: int, f1: float, f2: float, q1: float, q2: float):
    """``E[int_0^tau f(M_u) du | M_0 = m]`` for the two-state chain."""
    q = q1 + q2
    decay = 1.0 - np.exp(-q * np.asarray(tau, dtype=float))
    lead = (q2 * f1 + q1 * f2) / q * tau
    if m == 1:
        return lead + q1 / q**2 * (f1 - f2) * decay
    return lead - q2 / q**2 * (f1 - f2) * decay


def _check_markov(t, m, params):
    if not params.alternating:
        raise ParameterError("closed forms need alternating mode")
    if m not in (1, 2):
        raise ParameterError("m must be 1 or 2")
    if np.any(np.asarray(t) < 0) or np.any(np.asarray(t) > params.T):
        raise ParameterError("t must lie in [0, T]")


def closed_form_c_markov(t, m: int, i: int, params: MarketParams,
                         coeffs: EquilibriumCoefficients):
    """``c_i(t, m)`` for full information with a regime-switching drift.

    The transient decays like ``exp(-(q1 + q2)(T - t))``; this is the
    solution of the defining linear ODE system.
    """
    _check_markov(t, m, params)
    tau = params.T - np.asarray(t, dtype=float)
    k = coeffs.kappa[i]
    f1 = k * ((params.mu1 - params.r) / params.sigma) ** 2
    f2 = k * ((params.mu2 - params.r) / params.sigma) ** 2
    return _two_state_integral(tau, m, f1, f2, params.q1, params.q2)


def markov_Q(i: int, params: MarketParams, coeffs: EquilibriumCoefficients,
             variant: str = "derived"):
    """Per-state sources ``(Q_i^1, Q_i^2)``."""
    return tuple(constant_source(i, params, coeffs, mu, variant) for mu in (params.mu1, params.mu2))


def jump_variance(t, m: int, i: int, params: MarketParams, coeffs: EquilibriumCoefficients):
    """Variance contributed by the jumps of ``c_i(., M)``:
    ``E[int_t^T q_{M_u} (c_i(u, other) - c_i(u, M_u))^2 du | M_t = m]``."""
    _check_markov(t, m, params)
    q1, q2 = params.q1, params.q2
    q = q1 + q2
    tau = params.T - np.asarray(t, dtype=float)
    f1 = coeffs.kappa[i] * ((params.mu1 - params.r) / params.sigma) ** 2
    f2 = coeffs.kappa[i] * ((params.mu2 - params.r) / params.sigma) ** 2
    k2 = ((f1 - f2) / q) ** 2
    e1, e2 = np.exp(-q * tau), np.exp(-2 * q * tau)
    int_d2 = k2 * (tau - 2 * (1 - e1) / q + (1 - e2) / (2 * q))
    int_wd2 = k2 * ((1 - e1) / q - 2 * tau * e1 + (e1 - e2) / q)
    rho = 2 * q1 * q2 / q
    alpha = (q1 - q2) * q1 / q if m == 1 else -(q1 - q2) * q2 / q
    return rho * int_d2 + alpha * int_wd2


def closed_form_C_markov(t, m: int, i: int, params: MarketParams,
                         coeffs: EquilibriumCoefficients, variant: str = "derived",
                         include_jump_variance: bool = False):
    """``C_i(t, m) = E[int_t^T Q_i^{M_u} du | M_t = m]``, optionally minus
    ``(gamma_i/2)`` times :func:`jump_variance`.

    The jump term is the part of the terminal variance caused by regime
    switches; it is absent from the published closed form.
    """
    _check_markov(t, m, params)
    Q1, Q2 = markov_Q(i, params, coeffs, variant)
    tau = params.T - np.asarray(t, dtype=float)
    val = _two_state_integral(tau, m, Q1, Q2, params.q1, params.q2)
    if include_jump_variance:
        val = val - 0.5 * coeffs.gamma[i] * jump_variance(t, m, i, params, coeffs)
    return val
