"""Alternative families for power studies and lower-bound constructions.

The moment-matching pair uses the Chebyshev-Lobatto nodes cos(j pi / N),
N = k + 1, with trapezoid weights (1/2 at the ends, 1 inside). Because
T_N(x_j) = (-1)^j and the nodes are discretely orthogonal for T_0..T_{N-1},
the odd-indexed and even-indexed atoms carry equal mass and share their
first k moments exactly, while sitting W1 = 2h / (k + 1) apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from scipy import optimize

from binomix.mixture import MixingDistribution, moments, w1

FAMILIES = ("prob-perturb", "mean-shift", "mean-matched", "mass-leak", "moment-match")
MAX_MOMENT_K = 40


def _range(name: str, value: float, lo: float, hi: float) -> float:
    value = float(value)
    if not lo - 1e-15 <= value <= hi + 1e-15:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")
    return min(max(value, lo), hi)


def prob_perturb(eps: float) -> tuple[MixingDistribution, MixingDistribution]:
    eps = _range("eps", eps, 0.0, 0.5)
    pi0 = MixingDistribution([0.0, 1.0], [0.5, 0.5])
    pi1 = MixingDistribution([0.0, 1.0], [0.5 - eps, 0.5 + eps])
    return pi0, pi1


def mean_shift(p0: float, eps: float) -> MixingDistribution:
    p0 = _range("p0", p0, 0.0, 1.0)
    eps = _range("eps", eps, 0.0, 1.0 - p0)
    return MixingDistribution.point_mass(min(p0 + eps, 1.0))


def mean_matched(p0: float, eps: float) -> MixingDistribution:
    p0 = _range("p0", p0, 0.0, 1.0)
    eps = _range("eps", eps, 0.0, min(p0, 1.0 - p0))
    return MixingDistribution([p0 - eps, p0 + eps], [0.5, 0.5])


def mass_leak(p0: float, eps: float) -> MixingDistribution:
    """(1 - eps) delta_p0 + eps delta_1; here eps is the leaked mass, not W1."""
    p0 = _range("p0", p0, 0.0, 1.0)
    eps = _range("eps", eps, 0.0, 1.0)
    return MixingDistribution([p0, 1.0], [1.0 - eps, eps])


@dataclass(frozen=True)
class MomentMatchPair:
    pi0: MixingDistribution
    pi1: MixingDistribution
    k: int
    constant: float
    distance: float

    def __iter__(self):
        return iter((self.pi0, self.pi1))


def moment_match_pair(k: int, center: float = 0.5, halfwidth: float = 0.5) -> MomentMatchPair:
    """Two distributions on [center - h, center + h] sharing moments 1..k.

    W1 between them is exactly 2h / (k + 1) >= h / k, so the reported
    construction constant is c = h.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > MAX_MOMENT_K:
        raise ValueError(f"moment matching beyond k={MAX_MOMENT_K} is numerically ill-conditioned")
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")
    if center - halfwidth < -1e-12 or center + halfwidth > 1 + 1e-12:
        raise ValueError(f"[{center - halfwidth}, {center + halfwidth}] is not inside [0, 1]")
    N = k + 1
    j = np.arange(N + 1)
    nodes = np.cos(j * np.pi / N)
    wts = np.ones(N + 1)
    wts[[0, -1]] = 0.5
    pts = np.clip(center + halfwidth * nodes, 0.0, 1.0)
    odd, even = j % 2 == 1, j % 2 == 0
    pi0 = MixingDistribution(pts[odd], wts[odd])
    pi1 = MixingDistribution(pts[even], wts[even])
    gap = np.max(np.abs(moments(pi0, k) - moments(pi1, k)))
    if gap > 1e-9:
        raise ArithmeticError(f"moment mismatch {gap:.2e} for k={k}")
    return MomentMatchPair(pi0, pi1, k, float(halfwidth), w1(pi0, pi1))


def moment_match_lp_bound(k: int, center: float = 0.5, halfwidth: float = 0.5, size: int = 2001) -> float:
    """max E_1|x - c| - E_0|x - c| over pairs on a grid sharing moments 1..k.

    The witness |x - c| is 1-Lipschitz, so the optimum lower-bounds the best
    achievable W1 among k-moment-matching pairs on the interval.
    """
    y = np.linspace(-1.0, 1.0, size)
    x = center + halfwidth * y
    P = legendre.legvander(y, k)[:, 1:].T  # shifted-Legendre basis, degrees 1..k
    f = np.abs(x - center)
    G = len(x)
    c = np.concatenate((-f, f))  # variables (u, v): maximize f.(u - v)
    A_eq = np.vstack([np.hstack((P, -P)), np.concatenate((np.ones(G), np.zeros(G))), np.concatenate((np.zeros(G), np.ones(G)))])
    b_eq = np.concatenate((np.zeros(k), [1.0, 1.0]))
    res = optimize.linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"verification LP failed: {res.message}")
    return float(-res.fun)


# -- families keyed by W1 separation -----------------------------------------------


@dataclass(frozen=True)
class FamilySpec:
    kind: str
    p0: float = 0.5
    k: int = 8
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"unknown family {self.kind!r}; known: {', '.join(FAMILIES)}")

    @property
    def max_separation(self) -> float:
        if self.kind == "prob-perturb":
            return 0.5
        if self.kind in ("mean-shift", "mass-leak"):
            return 1.0 - self.p0
        if self.kind == "mean-matched":
            return min(self.p0, 1.0 - self.p0)
        return 1.0 / (self.k + 1)

    @property
    def null_varies(self) -> bool:
        return self.kind == "moment-match"

    def pair(self, eps: float) -> tuple[MixingDistribution, MixingDistribution]:
        """(null, alternative) at W1 separation eps."""
        eps = _range("separation", eps, 0.0, self.max_separation)
        if self.kind == "prob-perturb":
            return prob_perturb(eps)
        null = MixingDistribution.point_mass(self.p0)
        if self.kind == "mean-shift":
            return null, mean_shift(self.p0, eps)
        if self.kind == "mean-matched":
            return null, mean_matched(self.p0, eps)
        if self.kind == "mass-leak":
            return null, mass_leak(self.p0, eps / (1.0 - self.p0))
        if eps == 0:
            mid = MixingDistribution.point_mass(0.5)
            return mid, mid
        h = min(0.5, eps * (self.k + 1) / 2)
        pair = moment_match_pair(self.k, 0.5, h)
        return pair.pi0, pair.pi1

    def to_dict(self) -> dict:
        return {"kind": self.kind, "p0": self.p0, "k": self.k}
