"""Finitely supported mixing distributions and their binomial marginals.

Everything here is exact finite arithmetic over atoms: the W1, TV and
chi-squared distances reduce to sums over a merged support partition.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from binomix.rng import stream

ATOM_MERGE_TOL = 1e-12
_EXACT_TRIALS = 30


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MixingDistribution:
    """A probability measure on [0, 1] with finitely many atoms.

    The constructor sorts atoms, merges points closer than 1e-12, drops
    zero-weight atoms and renormalises.
    """

    support: np.ndarray
    weights: np.ndarray

    def __init__(self, support, weights=None):
        s = np.atleast_1d(np.asarray(support, dtype=float)).ravel()
        if weights is None:
            w = np.full(s.shape, 1.0 / max(len(s), 1))
        else:
            w = np.atleast_1d(np.asarray(weights, dtype=float)).ravel()
        if s.shape != w.shape:
            raise ValueError("support and weights must have the same length")
        if len(s) == 0:
            raise ValueError("a mixing distribution needs at least one atom")
        if not np.all(np.isfinite(s)) or not np.all(np.isfinite(w)):
            raise ValueError("support and weights must be finite")
        if np.any(s < -ATOM_MERGE_TOL) or np.any(s > 1 + ATOM_MERGE_TOL):
            raise ValueError("support points must lie in [0, 1]")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        s = np.clip(s, 0.0, 1.0)
        order = np.argsort(s, kind="stable")
        s, w = s[order], w[order]

        merged_s, merged_w = [s[0]], [w[0]]
        for x, m in zip(s[1:], w[1:]):
            if x - merged_s[-1] < ATOM_MERGE_TOL:
                merged_w[-1] += m
            else:
                merged_s.append(x)
                merged_w.append(m)
        s = np.array(merged_s)
        w = np.array(merged_w)
        keep = w > 0
        s, w = s[keep], w[keep]
        total = math.fsum(w)
        if abs(total - 1.0) > 1e-13:  # leave normalised input untouched so round trips are exact
            w = w / total
        object.__setattr__(self, "support", _readonly(s))
        object.__setattr__(self, "weights", _readonly(w))

    @classmethod
    def point_mass(cls, p: float) -> "MixingDistribution":
        return cls([p], [1.0])

    def __len__(self) -> int:
        return len(self.support)

    def __repr__(self) -> str:
        atoms = ", ".join(f"{w:.4g}@{s:.4g}" for s, w in zip(self.support, self.weights))
        return f"MixingDistribution({atoms})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixingDistribution):
            return NotImplemented
        return (
            len(self) == len(other)
            and np.array_equal(self.support, other.support)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash((self.support.tobytes(), self.weights.tobytes()))

    @property
    def is_point_mass(self) -> bool:
        return len(self.support) == 1

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(self.support, x, side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def mean(self) -> float:
        return float(np.dot(self.weights, self.support))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot(self.weights, (self.support - m) ** 2))

    def to_dict(self) -> dict:
        return {"support": self.support.tolist(), "weights": self.weights.tolist()}

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "MixingDistribution":
        try:
            return cls(d["support"], d["weights"])
        except KeyError as exc:
            raise ValueError(f"mixing distribution JSON is missing key {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "MixingDistribution":
        return cls.from_dict(json.loads(text))


def bernstein_matrix(trials: int, points) -> np.ndarray:
    """B[j, k] = C(t, j) p_k^j (1 - p_k)^(t - j), shape (t + 1, len(points))."""
    p = np.asarray(points, dtype=float)
    j = np.arange(trials + 1)[:, None]
    if trials <= _EXACT_TRIALS:
        coef = np.array([math.comb(trials, i) for i in range(trials + 1)], dtype=float)[:, None]
        return coef * p[None, :] ** j * (1.0 - p[None, :]) ** (trials - j)
    return stats.binom.pmf(j, trials, p[None, :])


@dataclass(frozen=True, eq=False)
class BinomialMixtureModel:
    """Counts X ~ Bin(t, p) with p drawn from the mixing distribution."""

    trials: int
    mixing: MixingDistribution
    _pmf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        object.__setattr__(self, "trials", int(self.trials))
        pmf = bernstein_matrix(self.trials, self.mixing.support) @ self.mixing.weights
        object.__setattr__(self, "_pmf", _readonly(pmf))

    @property
    def pmf(self) -> np.ndarray:
        return self._pmf


def marginal_pmf(model: BinomialMixtureModel) -> np.ndarray:
    """Expected fingerprints b_{j,t}(pi) for j = 0..t."""
    return model.pmf


def moments(pi: MixingDistribution, L: int) -> np.ndarray:
    """Raw moments m_1..m_L."""
    if L < 1:
        raise ValueError("L must be at least 1")
    powers = pi.support[None, :] ** np.arange(1, L + 1)[:, None]
    return powers @ pi.weights


def centered_moments(pi: MixingDistribution, p: float, L: int) -> np.ndarray:
    """E[(u - p)^m] for m = 1..L."""
    powers = (pi.support[None, :] - p) ** np.arange(1, L + 1)[:, None]
    return powers @ pi.weights


def _cdf_partition(pi0: MixingDistribution, pi1: MixingDistribution):
    pts = np.union1d(pi0.support, pi1.support)
    return pts, pi0.cdf(pts), pi1.cdf(pts)


def w1(pi0: MixingDistribution, pi1: MixingDistribution) -> float:
    """1-Wasserstein distance, integral of |F0 - F1| over the merged partition."""
    pts, f0, f1 = _cdf_partition(pi0, pi1)
    if len(pts) < 2:
        return 0.0
    return math.fsum(np.abs(f0[:-1] - f1[:-1]) * np.diff(pts))


def w1_to_pointmass_set(pi: MixingDistribution) -> tuple[float, float]:
    """Distance to the nearest point mass and the (leftmost) median achieving it."""
    cum = np.cumsum(pi.weights)
    idx = int(np.searchsorted(cum, 0.5 - 1e-15, side="left"))
    med = float(pi.support[min(idx, len(cum) - 1)])
    return math.fsum(pi.weights * np.abs(pi.support - med)), med


def j_functional(pi: MixingDistribution) -> float:
    """Integral over [0, 1] of sqrt(F (1 - F))."""
    if len(pi) < 2:
        return 0.0
    f = np.cumsum(pi.weights)[:-1]
    gaps = np.diff(pi.support)
    return math.fsum(np.sqrt(np.clip(f * (1 - f), 0.0, None)) * gaps)


def _check_same_trials(a: BinomialMixtureModel, b: BinomialMixtureModel) -> None:
    if a.trials != b.trials:
        raise ValueError(f"trial counts differ: {a.trials} vs {b.trials}")


def tv(model_a: BinomialMixtureModel, model_b: BinomialMixtureModel) -> float:
    _check_same_trials(model_a, model_b)
    return 0.5 * math.fsum(np.abs(model_a.pmf - model_b.pmf))


def chi2_marginal(null: BinomialMixtureModel, alt: BinomialMixtureModel) -> float:
    """Chi-squared divergence sum_j (alt_j - null_j)^2 / null_j."""
    _check_same_trials(null, alt)
    total = []
    for j, (q, p) in enumerate(zip(null.pmf, alt.pmf)):
        if q <= 0:
            if p > 0:
                raise ZeroDivisionError(
                    f"null marginal has zero mass at cell j={j} where the alternative is positive"
                )
            continue
        total.append((p - q) ** 2 / q)
    return math.fsum(total)


def moment_discrepancy(
    pi0: MixingDistribution, pi1: MixingDistribution, p: float, trials: int
) -> float:
    """sum_{m=1}^t C(t, m) Delta_m^2 / mu_p^m with Delta_m the centred moment gap.

    Controls TV and chi-squared distances between the binomial marginals.
    """
    if not 0 < p < 1:
        raise ValueError("centre p must lie in (0, 1)")
    mu = p * (1 - p)
    delta = centered_moments(pi1, p, trials) - centered_moments(pi0, p, trials)
    terms = [math.comb(trials, m) * delta[m - 1] ** 2 / mu**m for m in range(1, trials + 1)]
    return math.fsum(terms)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed counts x_i out of t_i trials."""

    x: np.ndarray
    t: np.ndarray

    def __init__(self, x, t):
        x = np.atleast_1d(np.asarray(x)).ravel()
        t = np.atleast_1d(np.asarray(t)).ravel()
        if t.size == 1 and x.size > 1:
            t = np.full(x.shape, t[0])
        if x.shape != t.shape:
            raise ValueError("counts and trials must have the same length")
        if x.size == 0:
            raise ValueError("a dataset needs at least one record")
        if np.any(x != np.round(x)) or np.any(t != np.round(t)):
            raise ValueError("counts and trials must be integers")
        x = x.astype(np.int64)
        t = t.astype(np.int64)
        for i, (xi, ti) in enumerate(zip(x, t)):
            if ti < 1:
                raise ValueError(f"record {i}: trials must be positive, got {ti}")
            if not 0 <= xi <= ti:
                raise ValueError(f"record {i}: count {xi} outside [0, {ti}]")
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "t", _readonly(t))

    @classmethod
    def from_records(cls, records) -> "Dataset":
        records = list(records)
        if not records:
            raise ValueError("a dataset needs at least one record")
        x, t = zip(*records)
        return cls(x, t)

    @property
    def records(self) -> list[tuple[int, int]]:
        return list(zip(self.x.tolist(), self.t.tolist()))

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def homogeneous_trials(self) -> bool:
        return bool(np.all(self.t == self.t[0]))

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.t, other.t)

    def __hash__(self) -> int:
        return hash((self.x.tobytes(), self.t.tobytes()))

    def reflect(self) -> "Dataset":
        return Dataset(self.t - self.x, self.t)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "t"])
        w.writerows(self.records)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, source) -> "Dataset":
        """Parse `x,t` CSV text or a path; `#` lines are comments."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text(encoding="utf-8")
        else:
            text = source
        rows = []
        header_seen = False
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = [f.strip() for f in stripped.split(",")]
            if not header_seen:
                if fields != ["x", "t"]:
                    raise ValueError(f"line {lineno}: expected header 'x,t', got {stripped!r}")
                header_seen = True
                continue
            if len(fields) != 2:
                raise ValueError(f"line {lineno}: expected two fields, got {len(fields)}")
            try:
                xi, ti = int(fields[0]), int(fields[1])
            except ValueError:
                raise ValueError(f"line {lineno}: non-integer field in {stripped!r}") from None
            if ti < 1 or not 0 <= xi <= ti:
                raise ValueError(f"line {lineno}: need 0 <= x <= t and t >= 1, got x={xi}, t={ti}")
            rows.append((xi, ti))
        if not header_seen:
            raise ValueError("missing header 'x,t'")
        if not rows:
            raise ValueError("no data rows")
        return cls.from_records(rows)


def draw_counts(
    rng: np.random.Generator, mixing: MixingDistribution, trials: np.ndarray, rows: int
) -> np.ndarray:
    """Sample a (rows, len(trials)) block of counts under the mixture.

    Point masses skip the atom-selection draw, so a point-mass mixture and
    the corresponding simple null consume the stream identically.
    """
    trials = np.asarray(trials, dtype=np.int64)
    shape = (rows, len(trials))
    if mixing.is_point_mass:
        p = np.full(shape, mixing.support[0])
    else:
        idx = rng.choice(len(mixing), size=shape, p=mixing.weights)
        p = mixing.support[idx]
    return rng.binomial(np.broadcast_to(trials, shape), p)


def sample(model: BinomialMixtureModel, n: int, seed: int) -> Dataset:
    """n i.i.d. draws from the binomial mixture; deterministic in the seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = stream(seed, "sample")
    trials = np.full(n, model.trials)
    x = draw_counts(rng, model.mixing, trials, 1)[0]
    return Dataset(x, trials)
