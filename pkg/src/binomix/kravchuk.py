"""Kravchuk polynomials, orthogonal under Bin(t, p).

The normalised form K~_m = K_m / C(t, m) is an unbiased estimator of the
centred moment (-1)^m (p - q)^m when X ~ Bin(t, q).
"""

from __future__ import annotations

import math

import numpy as np

from binomix.mixture import Dataset


def _comb(a: int, b: int) -> int:
    if b < 0 or b > a:
        return 0
    return math.comb(a, b)


def _check(m: int, x: int, p: float, t: int) -> None:
    if t < 1:
        raise ValueError("t must be a positive integer")
    if not 0 <= m <= t:
        raise ValueError(f"degree m={m} outside 0..{t}")
    if not 0 <= x <= t:
        raise ValueError(f"argument x={x} outside 0..{t}")
    if not 0 < p < 1:
        raise ValueError(f"p={p} must lie strictly inside (0, 1)")


def kravchuk(m: int, x: int, p: float, t: int) -> float:
    _check(m, x, p, t)
    q = 1.0 - p
    terms = [
        (-1) ** (m - v) * _comb(t - x, m - v) * _comb(x, v) * p ** (m - v) * q**v
        for v in range(m + 1)
    ]
    return math.fsum(terms)


def kravchuk_norm(m: int, x: int, p: float, t: int) -> float:
    return kravchuk(m, x, p, t) / math.comb(t, m)


def k1_norm(x, p, t):
    """Vectorised K~_1(x, p, t) = x / t - p; total in p."""
    return np.asarray(x, dtype=float) / t - p


def k2_norm(x, p, t):
    """Vectorised K~_2 in closed form, valid for any p in [0, 1] and t >= 2."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    q = 1.0 - p
    k2 = 0.5 * (t - x) * (t - x - 1) * p * p - (t - x) * x * p * q + 0.5 * x * (x - 1) * q * q
    return k2 / (0.5 * t * (t - 1))


def centered_moment_estimate(data: Dataset, p: float, m: int) -> float:
    """Average of K~_m(x_i, p, t_i); unbiased for E[(-1)^m (p - q)^m]."""
    if not 0 < p < 1:
        raise ValueError(f"p={p} must lie strictly inside (0, 1)")
    for i, (xi, ti) in enumerate(data.records):
        if m > ti:
            raise ValueError(f"record {i} has t={ti} < m={m}")
    vals = [kravchuk_norm(m, xi, p, ti) for xi, ti in data.records]
    return math.fsum(vals) / data.n
