"""Independent oracles shared by the test modules.

Nothing here imports the package's numerical kernels: the oracles are
exact rational sums, dense quadratures and brute-force enumerations.
"""

from __future__ import annotations

import itertools
import math
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from binomix.mixture import MixingDistribution


def bernstein_exact(j: int, t: int, p: Fraction) -> Fraction:
    return math.comb(t, j) * p**j * (1 - p) ** (t - j)


def marginal_exact(t: int, support, weights) -> list[Fraction]:
    return [
        sum(Fraction(w) * bernstein_exact(j, t, Fraction(s)) for s, w in zip(support, weights))
        for j in range(t + 1)
    ]


def binom_pmf(t: int, q: float) -> np.ndarray:
    return np.array([math.comb(t, x) * q**x * (1 - q) ** (t - x) for x in range(t + 1)])


def mixture_pmf(t: int, support, weights) -> np.ndarray:
    return sum(w * binom_pmf(t, s) for s, w in zip(support, weights))


def cdf_quadrature_w1(a: MixingDistribution, b: MixingDistribution, size: int = 400_001) -> float:
    """Midpoint-rule integral of |F_a - F_b| on a dense grid."""
    edges = np.linspace(0.0, 1.0, size)
    mid = 0.5 * (edges[1:] + edges[:-1])

    def F(pi):
        cum = np.concatenate(([0.0], np.cumsum(pi.weights)))
        return cum[np.searchsorted(pi.support, mid, side="right")]

    return float(np.abs(F(a) - F(b)).sum() / (size - 1))


def quantile_w1_exact(a: MixingDistribution, b: MixingDistribution) -> Fraction:
    """W1 as the integral of |Q_a(u) - Q_b(u)| over u, in exact rationals."""

    def cum(pi):
        out, c = [], Fraction(0)
        for w in pi.weights:
            c += Fraction(float(w))
            out.append(c)
        return [x / c for x in out]

    ca, cb = cum(a), cum(b)
    cuts = sorted(set([Fraction(0)] + ca + cb))
    total = Fraction(0)
    for lo, hi in zip(cuts, cuts[1:]):
        mid = (lo + hi) / 2
        qa = Fraction(float(a.support[next(i for i, c in enumerate(ca) if c >= mid)]))
        qb = Fraction(float(b.support[next(i for i, c in enumerate(cb) if c >= mid)]))
        total += abs(qa - qb) * (hi - lo)
    return total


def enumerate_datasets(trials: tuple[int, ...], support, weights):
    """Yield (x tuple, probability) for every outcome of independent records."""
    pmfs = [mixture_pmf(t, support, weights) for t in trials]
    for xs in itertools.product(*[range(t + 1) for t in trials]):
        prob = math.prod(pmfs[i][x] for i, x in enumerate(xs))
        yield xs, prob


@st.composite
def mixing_distributions(draw, max_atoms: int = 6):
    k = draw(st.integers(1, max_atoms))
    support = draw(st.lists(st.floats(0, 1), min_size=k, max_size=k))
    weights = draw(st.lists(st.floats(0.01, 1), min_size=k, max_size=k))
    return MixingDistribution(support, weights)


def random_mixing(rng: np.random.Generator, max_atoms: int = 5) -> MixingDistribution:
    k = int(rng.integers(1, max_atoms + 1))
    return MixingDistribution(rng.uniform(size=k), rng.dirichlet(np.ones(k)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
