"""Command-line entry point: ``mvgame {simulate,solve-cauchy,filter-demo,verify}``.

Scenarios are TOML files. Every run writes a ``manifest.toml`` holding the
fully resolved configuration; feeding it back through ``--config`` reproduces
the artifacts byte for byte. Exit codes: 2 configuration error, 3 numerical
failure, 4 failed gate (``--strict``, or any failure under ``verify``).
"""

from __future__ import annotations

import argparse
import ast
import copy
import json
import logging
import operator
import os
import pathlib
import sys

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from mvgame import __version__
from mvgame.cauchy import (
    EDGE_LOGITS,
    SOURCE_VARIANTS,
    MCConfig,
    default_p_nodes,
    default_t_nodes,
    estimate_c,
    load_or_build_tables,
    solve_cauchy_fd,
    table_cache_key,
)
from mvgame.core_model import (
    InvestorParams,
    MarketParams,
    NumericalError,
    ParameterError,
    compute_coefficients,
    params_hash,
)
from mvgame.equilibrium import StrategyKind, strategy_terms, value_function
from mvgame.filtering import posterior_closed_form, posterior_from_observations, simulate_truth
from mvgame.game_sim import (
    Scenario,
    loss_distribution,
    summary,
    write_loss_hist_csv,
    write_posterior_csv,
    write_wealth_csv,
)
from mvgame.stochastic_engine import TimeGrid

log = logging.getLogger("mvgame")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_GATE = 0, 2, 3, 4

MODES = ("constant-full", "constant-partial", "markov-full", "markov-partial")
STRATEGIES = ("equilibrium", "first-term-only", "full-info-baseline")
PROBE_T = (0.0, 5.0, 8.0)
PROBE_P = (0.25, 0.5, 0.75)

DEFAULTS = {
    "seed": 0,
    "R": 100,
    "prior": 0.5,
    "dt": None,
    "true_state": 1,
    "strategy": "equilibrium",
    "paths_written": 5,
    "grids": {"n_t": 64, "n_p": 41, "edge_logits": list(EDGE_LOGITS)},
    "mc": {"n_paths_c": 10_000, "n_paths_dc": 20_000, "n_paths_C": 4_000, "dt": 0.01,
           "seed": 20240101},
    "cauchy": {"C_method": "fd", "variant": "derived", "cache": True, "cache_dir": None,
               "fd_domains": [8, 16, 32, 64], "fd_space": 512, "fd_time": 1000,
               "probe_investor": 1},
}

# small constant-partial scenario used by the determinism check
DETERMINISM_CONFIG = """\
mode = "constant-partial"
seed = 7
R = 3
dt = 0.01
paths_written = 3

[market]
r = 0.05
sigma = 0.1
mu1 = 0.2
mu2 = 0.02
T = 2.0

[investors]
count = 3
gamma = "8 + 0.1*i"
lambda_m = 0.5
lambda_v = 0.5
x0 = 1.0

[grids]
n_t = 9
n_p = 11

[mc]
n_paths_c = 200
n_paths_dc = 400
dt = 0.02

[cauchy]
cache = false
"""


class ConfigError(ValueError):
    """Invalid or incomplete configuration."""


class GateFailure(RuntimeError):
    """A strict-mode gate did not pass."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_expression(expr, i: int, field: str) -> float:
    """Evaluate an arithmetic expression in the investor index ``i``.

    Only numbers, ``i``, ``+ - * / **`` and parentheses are accepted.
    """
    if isinstance(expr, (int, float)) and not isinstance(expr, bool):
        return float(expr)
    if not isinstance(expr, str):
        raise ConfigError(f"{field}: expected a number or expression string, got {expr!r}")
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"{field}: cannot parse expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "i":
            return float(i)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ConfigError(f"{field}: unsupported element in expression {expr!r}")

    try:
        return float(ev(tree))
    except ZeroDivisionError as exc:
        raise ConfigError(f"{field}: division by zero in {expr!r} at i={i}") from exc


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _number(section: dict, key: str, where: str, required: bool = True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    val = section[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {val!r}")
    return float(val)


def _int(cfg: dict, key: str, where: str, minimum: int = 0) -> int:
    val = cfg.get(key)
    if isinstance(val, bool) or not isinstance(val, int) or val < minimum:
        raise ConfigError(f"{where}{key}: expected an integer >= {minimum}, got {val!r}")
    return val


def _investor_rows(inv: dict) -> list[dict]:
    if "list" in inv:
        rows = inv["list"]
        if not isinstance(rows, list) or not rows:
            raise ConfigError("investors.list: expected a non-empty array of tables")
        out = []
        for k, row in enumerate(rows, start=1):
            out.append({f: eval_expression(row.get(f, inv.get(f)), k, f"investors.list[{k}].{f}")
                        for f in ("gamma", "lambda_m", "lambda_v", "x0")
                        if f in row or f in inv})
        return out
    if "count" not in inv:
        raise ConfigError("investors: give either 'list' or 'count' with per-field expressions")
    count = _int(inv, "count", "investors.", minimum=1)
    for f in ("gamma", "lambda_m", "lambda_v"):
        if f not in inv:
            raise ConfigError(f"investors.{f}: missing required field")
    fields = [f for f in ("gamma", "lambda_m", "lambda_v", "x0") if f in inv]
    return [{f: eval_expression(inv[f], i, f"investors.{f}") for f in fields}
            for i in range(1, count + 1)]


def resolve_config(raw: dict) -> dict:
    """Merge defaults into a raw config and validate it. The result is what
    the manifest records."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    cfg = _merge(DEFAULTS, raw)
    if "mode" not in cfg:
        raise ConfigError("mode: missing required field (one of " + ", ".join(MODES) + ")")
    if cfg["mode"] not in MODES:
        raise ConfigError(f"mode: must be one of {MODES}, got {cfg['mode']!r}")
    if cfg["strategy"] not in STRATEGIES:
        raise ConfigError(f"strategy: must be one of {STRATEGIES}, got {cfg['strategy']!r}")
    if cfg["mode"].endswith("-full") and cfg["strategy"] == "first-term-only":
        raise ConfigError("strategy: first-term-only needs a partial-information mode")
    market = cfg.get("market")
    if not isinstance(market, dict):
        raise ConfigError("market: missing required section")
    for key in ("r", "sigma", "mu1", "mu2", "T"):
        _number(market, key, "market")
    if cfg["mode"].startswith("markov"):
        for key in ("q1", "q2"):
            _number(market, key, "market")
    inv = cfg.get("investors")
    if not isinstance(inv, dict):
        raise ConfigError("investors: missing required section")
    _investor_rows(inv)
    for key in ("seed", "R", "paths_written"):
        _int(cfg, key, "", minimum=0 if key != "R" else 1)
    if cfg["true_state"] not in (1, 2):
        raise ConfigError(f"true_state: must be 1 or 2, got {cfg['true_state']!r}")
    _number(cfg, "prior", "config")
    if cfg["dt"] is not None:
        _number(cfg, "dt", "config")
    for key in ("n_t", "n_p"):
        _int(cfg["grids"], key, "grids.", minimum=2)
    for key in ("n_paths_c", "n_paths_dc", "n_paths_C", "seed"):
        _int(cfg["mc"], key, "mc.", minimum=1 if key != "seed" else 0)
    _number(cfg["mc"], "dt", "mc")
    if cfg["cauchy"]["variant"] not in SOURCE_VARIANTS:
        raise ConfigError(f"cauchy.variant: must be one of {SOURCE_VARIANTS}")
    if cfg["cauchy"]["C_method"] not in ("fd", "mc"):
        raise ConfigError("cauchy.C_method: must be 'fd' or 'mc'")
    # drop unset optional values: TOML has no null
    cfg = {k: v for k, v in cfg.items() if v is not None}
    cfg["cauchy"] = {k: v for k, v in cfg["cauchy"].items() if v is not None}
    return cfg


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file is not valid TOML: {exc}") from exc
    return resolve_config(raw)


class Built:
    """Model objects derived from a resolved config."""

    def __init__(self, cfg: dict, threads: int = 1):
        self.cfg = cfg
        m = cfg["market"]
        markov = cfg["mode"].startswith("markov")
        try:
            self.params = MarketParams(
                r=float(m["r"]), sigma=float(m["sigma"]), mu1=float(m["mu1"]),
                mu2=float(m["mu2"]), T=float(m["T"]),
                mode="alternating" if markov else "constant", state=cfg["true_state"],
                q1=float(m.get("q1", 0.0)), q2=float(m.get("q2", 0.0)))
            rows = _investor_rows(cfg["investors"])
            self.investors = [InvestorParams(r["gamma"], r["lambda_m"], r["lambda_v"]) for r in rows]
            self.coeffs = compute_coefficients(self.investors)
            self.x0 = np.array([r.get("x0", 1.0) for r in rows])
            mc = cfg["mc"]
            self.mc = MCConfig(n_paths_c=mc["n_paths_c"], n_paths_dc=mc["n_paths_dc"],
                               n_paths_C=mc["n_paths_C"], dt=float(mc["dt"]), seed=mc["seed"],
                               threads=threads)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
        g = cfg["grids"]
        self.t_nodes = default_t_nodes(self.params.T, g["n_t"])
        self.p_nodes = default_p_nodes(g["n_p"], tuple(g["edge_logits"]))
        self.partial = cfg["mode"].endswith("-partial")
        self.kind = self._kind()

    def _kind(self) -> StrategyKind:
        full = (StrategyKind.FULL_INFO_MARKOV if self.params.alternating
                else StrategyKind.FULL_INFO_CONSTANT)
        strategy = self.cfg["strategy"]
        if not self.partial or strategy == "full-info-baseline":
            return full
        if strategy == "first-term-only":
            return StrategyKind.PARTIAL_INFO_FIRST_TERM
        return StrategyKind.PARTIAL_INFO

    @property
    def hash(self) -> str:
        return params_hash(self.params, self.coeffs, self.x0)

    def cache_dir(self):
        c = self.cfg["cauchy"]
        if not c.get("cache", True):
            return None
        base = c.get("cache_dir") or os.environ.get("MVGAME_CACHE") or \
            pathlib.Path.home() / ".cache" / "mvgame"
        return pathlib.Path(base)

    def tables(self):
        c = self.cfg["cauchy"]
        table, path, hit = load_or_build_tables(
            self.params, self.coeffs, self.cache_dir(), self.t_nodes, self.p_nodes, self.mc,
            c["C_method"], c["variant"])
        log.info("cauchy tables %s%s", "loaded from " if hit else "built",
                 f" {path}" if path else "")
        return table

    def table_key(self) -> str:
        c = self.cfg["cauchy"]
        return table_cache_key(self.params, self.coeffs, self.t_nodes, self.p_nodes, self.mc,
                               c["C_method"], c["variant"])


def _out_dir(args, cfg) -> pathlib.Path:
    out = pathlib.Path(args.out or cfg.get("out") or "mvgame_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: pathlib.Path, cfg: dict, extra: dict) -> None:
    manifest = {k: v for k, v in cfg.items() if k != "out"}
    manifest["provenance"] = {"mvgame_version": __version__, **extra}
    with open(out / "manifest.toml", "wb") as fh:
        tomli_w.dump(manifest, fh)


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _probe_rows(b: Built, table):
    """Rows ``t, state, i, pi_star, first_term, second_term, V_i`` at the
    probe grid (``x_i`` set to the configured initial wealth)."""
    rows = []
    T = b.params.T
    times = [t * T / 10.0 for t in PROBE_T]
    if b.kind.partial:
        states = list(PROBE_P)
    elif b.kind is StrategyKind.FULL_INFO_MARKOV:
        states = [1, 2]
    else:
        states = [None]
    for t in times:
        for s in states:
            first, second = strategy_terms(b.kind, t, s, b.coeffs, b.params, table)
            for i in range(b.coeffs.N):
                if b.kind is StrategyKind.PARTIAL_INFO_FIRST_TERM:
                    V = float("nan")
                else:
                    V = value_function(b.kind, t, b.x0, s, i, b.coeffs, b.params, table,
                                       variant=b.cfg["cauchy"]["variant"])
                rows.append((t, "none" if s is None else s, i + 1, float(first[i] - second[i]),
                             float(first[i]), float(second[i]), V))
    return rows


def cmd_simulate(args, cfg) -> int:
    b = Built(cfg, args.threads)
    out = _out_dir(args, cfg)
    table = b.tables() if b.partial else None
    dt = cfg.get("dt")
    sc = Scenario(b.params, b.coeffs, b.kind, b.x0, prior=float(cfg["prior"]), dt=dt,
                  table=table, seed=cfg["seed"], audit=args.strict)
    kept = []
    dist = loss_distribution(sc, cfg["R"], keep=kept)
    comment = f"params_hash={b.hash} seed={cfg['seed']}"
    shown = kept[: cfg["paths_written"]]
    write_wealth_csv(out / "wealth.csv", shown, comment)
    write_posterior_csv(out / "posterior.csv", shown, comment)
    write_loss_hist_csv(out / "loss_hist.csv", dist, comment)
    with open(out / "strategy_probe.csv", "w", newline="") as fh:
        fh.write(f"# {comment}\n")
        fh.write("t,state,i,pi_star,first_term,second_term,V_i\n")
        for row in _probe_rows(b, table):
            fh.write("{:.10g},{},{},{:.17g},{:.17g},{:.17g},{:.17g}\n".format(*row))
    summ = summary(sc, dist)
    steps = sum(r.posterior.innovations.size for r in kept)
    summ["posterior_clamp_rate"] = dist.clamp_count / steps
    summ["max_xbar_identity_error"] = max(r.xbar_identity_error for r in kept)
    summ["mode"] = cfg["mode"]
    summ["strategy"] = cfg["strategy"]
    _write_json(out / "summary.json", summ)
    extra = {"params_hash": b.hash}
    if b.partial:
        extra["table_key"] = b.table_key()
    _write_manifest(out, cfg, extra)
    log.info("all-default probability %.3f over %d realizations", dist.p_all_default, dist.R)
    if args.strict:
        failures = []
        if summ["max_xbar_identity_error"] > 1e-10:
            failures.append("population-average identity error above 1e-10")
        if summ["posterior_clamp_rate"] >= 1e-3:
            failures.append(f"posterior clamp rate {summ['posterior_clamp_rate']:.2e} >= 1e-3")
        if failures:
            raise GateFailure("; ".join(failures))
    return EXIT_OK


def cmd_solve_cauchy(args, cfg) -> int:
    b = Built(cfg, args.threads)
    out = _out_dir(args, cfg)
    table = b.tables()
    comment_hash = b.hash
    table.to_csv(out / "cauchy_table.csv")
    c = cfg["cauchy"]
    i = int(c["probe_investor"]) - 1
    if not 0 <= i < b.coeffs.N:
        raise ConfigError("cauchy.probe_investor: out of range")
    domains = [int(n) for n in c["fd_domains"]]
    times = np.array([t * b.params.T / 10.0 for t in PROBE_T])
    fds = {n: solve_cauchy_fd(i, b.params, b.coeffs, n=n, n_space=c["fd_space"],
                              n_time=c["fd_time"], t_out=times) for n in domains}
    full = solve_cauchy_fd(i, b.params, b.coeffs, n=None, n_space=c["fd_space"],
                           n_time=c["fd_time"], t_out=times)
    for n, tab in fds.items():
        tab.to_csv(out / f"fd_first_problem_n{n}.csv")
    full.to_csv(out / "fd_first_problem_full.csv")
    probes = []
    for t in times:
        for p in PROBE_P:
            v, se = estimate_c(t, p, i, b.params, b.coeffs, b.mc)
            row = {"t": t, "p": p, "mc": v, "se": se,
                   "fd_full": float(full.interp("c", t, p, i, warn=False))}
            for n, tab in fds.items():
                row[f"fd_n{n}"] = float(tab.interp("c", t, p, i, warn=False))
            probes.append(row)
    largest = domains[-1] if domains else None
    rel = {f"fd_n{largest}": max(abs(r["mc"] - r[f"fd_n{largest}"]) / abs(r[f"fd_n{largest}"])
                                 for r in probes) if largest else None,
           "fd_full": max(abs(r["mc"] - r["fd_full"]) / max(abs(r["fd_full"]), 1e-300)
                          for r in probes)}
    mono = 0.0
    for lo, hi in zip(domains[:-1], domains[1:]):
        for j in range(len(times)):
            mono = max(mono, float(np.max(fds[lo].c[i, j] - np.interp(fds[lo].p, fds[hi].p,
                                                                       fds[hi].c[i, j]))))
    report = {"params_hash": comment_hash, "investor": i + 1, "probes": probes,
              "max_rel_mc_fd": rel, "monotonicity_max_violation": mono,
              "max_abs_dc_dp": table.max_abs_dc_dp(),
              "terminal_rows_zero": bool(np.all(table.c[:, -1] == 0) and np.all(table.dc_dp[:, -1] == 0)),
              "mc_clamps": table.provenance.get("clamps")}
    _write_json(out / "cross_oracle.json", report)
    _write_manifest(out, cfg, {"params_hash": comment_hash, "table_key": b.table_key()})
    if args.strict:
        failures = []
        if largest and rel[f"fd_n{largest}"] > 0.03:
            failures.append(f"MC vs FD(n={largest}) {rel[f'fd_n{largest}']:.1%} > 3%")
        if mono > 1e-9:
            failures.append("FD nested-domain monotonicity violated")
        if failures:
            raise GateFailure("; ".join(failures))
    return EXIT_OK


def cmd_filter_demo(args, cfg) -> int:
    b = Built(cfg, args.threads)
    out = _out_dir(args, cfg)
    dt = cfg.get("dt") or 1e-3 * b.params.T
    grid = TimeGrid(0.0, b.params.T, max(1, int(round(b.params.T / dt))))
    truth = simulate_truth(b.params, grid, cfg["seed"])
    prior = float(cfg["prior"])
    euler = posterior_from_observations(None, prior, b.params, grid, log_returns=truth.log_returns)
    cols = [grid.times, euler.values[0]]
    header = "t,P_euler"
    report = {"params_hash": b.hash, "seed": cfg["seed"], "dt": grid.dt,
              "euler_clamps": euler.clamp_count, "euler_overshoots": euler.overshoot_count}
    if not b.params.alternating:
        exact = posterior_closed_form(truth.log_returns, prior, b.params, grid)
        cols.append(exact.values[0])
        header += ",P_closed_form"
        report["max_abs_deviation"] = float(np.max(np.abs(exact.values - euler.values)))
    else:
        cols.append(truth.chain[0].astype(float))
        header += ",chain_state"
    cols.append(np.append(euler.innovations[0], np.nan))
    header += ",innovation_increment"
    with open(out / "filter_demo.csv", "w", newline="") as fh:
        fh.write(f"# params_hash={b.hash} seed={cfg['seed']}\n")
        np.savetxt(fh, np.column_stack(cols), delimiter=",", header=header, comments="",
                   fmt="%.17g")
    _write_json(out / "filter_report.json", report)
    _write_manifest(out, cfg, {"params_hash": b.hash})
    if args.strict and "max_abs_deviation" in report and report["max_abs_deviation"] > 1e-2:
        raise GateFailure(f"filter deviation {report['max_abs_deviation']:.3g} > 1e-2")
    return EXIT_OK


def cmd_verify(args) -> int:
    from mvgame.verification import SUITES, Context, run_suite

    suites = list(SUITES) if args.suite == "all" else [args.suite]
    ctx = Context(cache_dir=args.cache_dir or (pathlib.Path.home() / ".cache" / "mvgame"),
                  mc=MCConfig(threads=args.threads))
    results = []
    for s in suites:
        results += run_suite(s, ctx, log=lambda line: print(line, file=sys.stderr))
    verdict = {"suite": args.suite, "passed": all(r.passed for r in results),
               "criteria": [r.to_dict() for r in results]}
    text = json.dumps(verdict, indent=2, sort_keys=True, default=_json_default)
    if args.out:
        out = pathlib.Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{args.suite}.json").write_text(text + "\n")
    print(text)
    return EXIT_OK if verdict["passed"] else EXIT_GATE


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--strict", action="store_true", help="exit 4 when a gate fails")
    common.add_argument("--threads", type=int, default=1, help="worker threads for table builds")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="mvgame", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "run a scenario and write wealth/default artifacts"),
                        ("solve-cauchy", "build Cauchy tables and the cross-oracle report"),
                        ("filter-demo", "one observed path with its filters")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--config", required=True, help="scenario TOML file")
    v = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    v.add_argument("suite", choices=("filter", "cauchy", "equilibrium", "figures", "all"))
    v.add_argument("--config", help="unused; accepted for symmetry")
    v.add_argument("--cache-dir", help="table cache directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("config error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "verify":
            return cmd_verify(args)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        handler = {"simulate": cmd_simulate, "solve-cauchy": cmd_solve_cauchy,
                   "filter-demo": cmd_filter_demo}[args.command]
        return handler(args, cfg)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return EXIT_GATE


if __name__ == "__main__":
    sys.exit(main())
