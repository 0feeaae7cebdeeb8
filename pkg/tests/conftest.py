from __future__ import annotations

import sys
from pathlib import Path

import pytest

from mvgame import InvestorParams, MarketParams, compute_coefficients

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def fig1():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=10.0)
    inv = [InvestorParams(8 + 0.1 * i, 0.5, 0.5) for i in range(1, 11)]
    return params, compute_coefficients(inv)


@pytest.fixture
def fig2():
    params = MarketParams(r=0.05, sigma=0.1, mu1=0.2, mu2=0.02, T=10.0, mode="alternating",
                          state=1, q1=10.0, q2=10.0)
    inv = [InvestorParams(0.1 * i, 0.9, 0.9) for i in range(1, 11)]
    return params, compute_coefficients(inv)


@pytest.fixture
def mixed():
    """Heterogeneous weights so that the mean-gap term is non-zero."""
    params = MarketParams(r=0.03, sigma=0.2, mu1=0.15, mu2=0.01, T=2.0)
    inv = [InvestorParams(2.0, 0.5, 0.3), InvestorParams(4.0, 0.2, 0.6), InvestorParams(3.0, 0.4, 0.4)]
    return params, compute_coefficients(inv)
