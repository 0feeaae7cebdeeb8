"""A short tour of the library on a small three-investor market.

Run with ``python demos/walkthrough.py``. Takes well under a minute.
"""

from __future__ import annotations

import numpy as np

from mvgame import (
    InvestorParams,
    MarketParams,
    MCConfig,
    Profile,
    Scenario,
    StrategyKind,
    build_tables,
    compute_coefficients,
    loss_distribution,
    strategy_terms,
    value_function,
)
from mvgame.cauchy import default_p_nodes
from mvgame.equilibrium import ObjectiveConfig, estimate_objective


def main():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=2.0)
    investors = [InvestorParams(4.0, 0.5, 0.5), InvestorParams(6.0, 0.3, 0.6),
                 InvestorParams(8.0, 0.7, 0.4)]
    coeffs = compute_coefficients(investors)
    print("kappa:", np.round(coeffs.kappa, 4), " kappa_bar:", round(coeffs.kappa_bar, 4))

    # tables of c, dc/dp and C on a coarse grid
    mc = MCConfig(n_paths_c=4000, n_paths_dc=8000, dt=0.01, seed=11)
    table = build_tables(params, coeffs, np.linspace(0, 2, 11), default_p_nodes(25), mc)

    # the partial-information strategy splits into a myopic and a hedging part
    p = np.array([0.2, 0.5, 0.8])
    first, second = strategy_terms(StrategyKind.PARTIAL_INFO, 0.0, p, coeffs, params, table)
    print("\nat t=0, posterior p =", p)
    print("myopic term:\n", np.round(first, 3))
    print("hedging term:\n", np.round(second, 3))

    # the value function against a direct simulation of the objective
    x = np.ones(coeffs.N)
    prof = Profile(StrategyKind.PARTIAL_INFO, coeffs, params, table)
    est = estimate_objective(prof, 0, 0.0, x, 0.5, ObjectiveConfig(n_paths=20000, dt=0.005))
    V = value_function(StrategyKind.PARTIAL_INFO, 0.0, x, 0.5, 0, coeffs, params, table)
    print(f"\ninvestor 1 at p=0.5: V = {V:.4f}, simulated J = {est.J:.4f} +- {est.se_J:.4f}")

    # default counts with and without the drift known
    for kind in (StrategyKind.FULL_INFO_CONSTANT, StrategyKind.PARTIAL_INFO,
                 StrategyKind.PARTIAL_INFO_FIRST_TERM):
        sc = Scenario(params, coeffs, kind, np.full(3, 0.2), table=table, dt=0.01, seed=3)
        dist = loss_distribution(sc, R=200)
        print(f"{kind.value:>24}: default counts {dist.counts.tolist()}")


if __name__ == "__main__":
    main()
