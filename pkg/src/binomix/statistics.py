"""Test statistics for binomial random-effects data.

Every statistic has a batch kernel operating on a (replicates, records)
array of counts sharing one trials profile; the Dataset-level functions are
thin wrappers over the same kernels so calibration and evaluation never
diverge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from binomix.kravchuk import k1_norm, k2_norm
from binomix.mixture import BinomialMixtureModel, Dataset, MixingDistribution

DEFAULT_GAMMA = 1e-10


@dataclass(frozen=True)
class MixingNull:
    pi0: MixingDistribution

    def to_dict(self) -> dict:
        return {"kind": "mixing", "pi0": self.pi0.to_dict()}


@dataclass(frozen=True)
class PointNull:
    p0: float

    def __post_init__(self):
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0={self.p0} must lie in [0, 1]")
        object.__setattr__(self, "p0", float(self.p0))

    def to_dict(self) -> dict:
        return {"kind": "point", "p0": self.p0}


@dataclass(frozen=True)
class CompositePointMassNull:
    def to_dict(self) -> dict:
        return {"kind": "composite"}


NullSpec = Union[MixingNull, PointNull, CompositePointMassNull]


def null_from_dict(d: dict) -> NullSpec:
    kind = d.get("kind")
    if kind == "mixing":
        return MixingNull(MixingDistribution.from_dict(d["pi0"]))
    if kind == "point":
        return PointNull(d["p0"])
    if kind == "composite":
        return CompositePointMassNull()
    raise ValueError(f"unknown null kind {kind!r}")


def null_mixing(null: NullSpec) -> MixingDistribution:
    """The law data are simulated from under a simple null."""
    if isinstance(null, MixingNull):
        return null.pi0
    if isinstance(null, PointNull):
        return MixingDistribution.point_mass(null.p0)
    raise ValueError("a composite null has no single sampling law")


def _as_null(null) -> NullSpec:
    if isinstance(null, (MixingNull, PointNull, CompositePointMassNull)):
        return null
    if isinstance(null, MixingDistribution):
        return MixingNull(null)
    if isinstance(null, (int, float, np.floating)):
        return PointNull(float(null))
    if null is None:
        return CompositePointMassNull()
    raise TypeError(f"cannot interpret {null!r} as a null hypothesis")


def _point_value(null: NullSpec) -> float:
    if isinstance(null, PointNull):
        return null.p0
    if isinstance(null, MixingNull) and null.pi0.is_point_mass:
        return float(null.pi0.support[0])
    raise ValueError("this statistic needs a point-mass null p0")


class StatisticError(ValueError):
    pass


# -- batch kernels ----------------------------------------------------------
# x: (B, n) int counts, t: (n,) int trials.
# Row reductions go through C-contiguous copies: numpy's summation order
# depends on memory layout, and a batch row must equal the single-dataset
# value bit for bit so observed values and simulated thresholds tie exactly.


def _rowsum(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a).sum(axis=1)


def _rowmean(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    return a.sum(axis=1) / a.shape[1]


def fingerprint_counts(x: np.ndarray, trials: int) -> np.ndarray:
    x = np.atleast_2d(x)
    B = x.shape[0]
    flat = x + (trials + 1) * np.arange(B)[:, None]
    return np.bincount(flat.ravel(), minlength=B * (trials + 1)).reshape(B, trials + 1)


def _common_trials(t: np.ndarray, name: str) -> int:
    if not np.all(t == t[0]):
        raise StatisticError(
            f"{name} needs equal trial counts; use a varying-trials statistic "
            "(mean_t1, debiased_l2_t2, l2, vhat, ...) for heterogeneous data"
        )
    return int(t[0])


def _batch_w1_plugin(x, t, pi0: MixingDistribution, gamma):
    r = np.sort(x / t[None, :], axis=1)
    n = x.shape[1]
    cum0 = np.cumsum(pi0.weights)
    cum0[-1] = 1.0
    edges = np.union1d(np.arange(n + 1) / n, np.concatenate(([0.0], cum0)))
    lo, hi = edges[:-1], edges[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    mid = 0.5 * (lo + hi)
    emp_idx = np.minimum((mid * n).astype(np.int64), n - 1)
    null_idx = np.minimum(np.searchsorted(cum0, mid, side="right"), len(cum0) - 1)
    diff = np.abs(r[:, emp_idx] - pi0.support[null_idx][None, :])
    return _rowsum(diff * (hi - lo))


def _batch_debiased_pearson(x, t, pi0: MixingDistribution, gamma):
    tt = _common_trials(t, "debiased_pearson")
    n = x.shape[1]
    if n < 2:
        raise StatisticError("debiased_pearson needs n >= 2")
    b = BinomialMixtureModel(tt, pi0).pmf
    counts = fingerprint_counts(x, tt)
    num = k2_norm(counts, b[None, :], n)
    den = np.maximum(1.0 / (tt + 1), b * (1 - b))
    return _rowsum(num / den) / (tt + 1)


def _batch_modified_pearson_gof(x, t, pi0, gamma):
    tt = _common_trials(t, "modified_pearson_gof")
    n = x.shape[1]
    b = BinomialMixtureModel(tt, pi0).pmf
    f = fingerprint_counts(x, tt) / n
    return _rowsum((f - b) ** 2 / np.maximum(b * (1 - b), gamma)) / (tt + 1)


def _batch_modified_lrt_gof(x, t, pi0, gamma):
    tt = _common_trials(t, "modified_lrt_gof")
    n = x.shape[1]
    b = BinomialMixtureModel(tt, pi0).pmf
    f = fingerprint_counts(x, tt) / n
    terms = f * np.log(np.maximum(f, gamma) / np.maximum(b, gamma))
    return np.abs(_rowsum(terms) / (tt + 1))


def _batch_mean_t1(x, t, p0, gamma):
    return _rowmean(k1_norm(x, p0, t[None, :]))


def _batch_debiased_l2_t2(x, t, p0, gamma):
    bad = np.flatnonzero(t < 2)
    if bad.size:
        raise StatisticError(f"debiased_l2_t2 needs t >= 2; record {bad[0]} has t={t[bad[0]]}")
    return _rowmean(k2_norm(x, p0, t[None, :]))


def _batch_l2(x, t, p0, gamma):
    return _rowmean((x / t[None, :] - p0) ** 2)


def _batch_modified_pearson_homog(x, t, p0, gamma, use_variance_norm=False):
    val = _rowmean(t[None, :] * (x / t[None, :] - p0) ** 2)
    if use_variance_norm:
        mu = p0 * (1 - p0)
        if mu == 0:
            raise StatisticError("variance-normalised Pearson form is undefined at p0 in {0, 1}")
        val = val / mu
    return val


def _batch_modified_lrt_homog(x, t, p0, gamma):
    r = x / t[None, :]
    a = x * np.log(np.maximum(r, gamma) / max(p0, gamma))
    b = (t[None, :] - x) * np.log(np.maximum(1 - r, gamma) / max(1 - p0, gamma))
    return np.abs(_rowmean(a + b))


def _needs_pairs(x, t, name, min_t):
    n = x.shape[1]
    if n < 2:
        raise StatisticError(f"{name} needs n >= 2 records")
    bad = np.flatnonzero(t < min_t)
    if bad.size:
        raise StatisticError(f"{name} needs t >= {min_t}; record {bad[0]} has t={t[bad[0]]}")
    return n


def _batch_vhat(x, t, null, gamma):
    n = _needs_pairs(x, t, "vhat", 2)
    tt = t[None, :].astype(float)
    a = x * (x - 1) / (tt * (tt - 1))
    r = x / tt
    sr = _rowsum(r)
    return ((n - 1) * _rowsum(a) - sr * sr + _rowsum(r * r)) / (n * (n - 1))


def _batch_muhat(x, t, null, gamma):
    n = _needs_pairs(x, t, "muhat", 1)
    r = x / t[None, :]
    sr = _rowsum(r)
    return ((n - 1) * sr - sr * sr + _rowsum(r * r)) / (n * (n - 1))


def _pooled_mean(x, t):
    return _rowsum(x) / t.sum()


def _batch_cochran_modified(x, t, null, gamma):
    n = _needs_pairs(x, t, "cochran_modified", 1)
    m = _pooled_mean(x, t)
    r = x / t[None, :]
    vt = _rowsum(t[None, :] * (r - m[:, None]) ** 2) / (n - 1)
    return vt / np.maximum(m * (1 - m), gamma)


def _batch_debiased_cochran_v1(x, t, null, gamma):
    m = _pooled_mean(x, t)
    return _batch_vhat(x, t, null, gamma) / np.maximum(m * (1 - m), gamma)


def _batch_debiased_cochran_v2(x, t, null, gamma):
    return _batch_vhat(x, t, null, gamma) / np.maximum(_batch_muhat(x, t, null, gamma), gamma)


# -- registry -----------------------------------------------------------------


@dataclass(frozen=True)
class Statistic:
    """A named statistic and the kind of null it is tested against.

    kind is "gof" (mixing-distribution null), "point" (reference effect p0)
    or "free" (composite null of all point masses).
    """

    name: str
    kind: str
    kernel: Callable
    reflection_invariant: bool = False

    def null_param(self, null):
        null = _as_null(null)
        if self.kind == "gof":
            if isinstance(null, CompositePointMassNull):
                raise StatisticError(f"{self.name} needs a mixing-distribution null")
            return null_mixing(null)
        if self.kind == "point":
            return _point_value(null)
        return None

    def batch(self, x, t, null=None, gamma: float = DEFAULT_GAMMA) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x))
        t = np.asarray(t, dtype=np.int64)
        return np.asarray(self.kernel(x, t, self.null_param(null), gamma), dtype=float)

    def __call__(self, data: Dataset, null=None, gamma: float = DEFAULT_GAMMA) -> float:
        return float(self.batch(data.x[None, :], data.t, null, gamma)[0])


STATISTICS: dict[str, Statistic] = {}


def register(stat: Statistic) -> Statistic:
    STATISTICS[stat.name] = stat
    return stat


for _s in [
    Statistic("w1_plugin", "gof", _batch_w1_plugin),
    Statistic("debiased_pearson", "gof", _batch_debiased_pearson),
    Statistic("modified_pearson_gof", "gof", _batch_modified_pearson_gof),
    Statistic("modified_lrt_gof", "gof", _batch_modified_lrt_gof),
    Statistic("mean_t1", "point", _batch_mean_t1),
    Statistic("debiased_l2_t2", "point", _batch_debiased_l2_t2),
    Statistic("l2", "point", _batch_l2),
    Statistic("modified_pearson_homog", "point", _batch_modified_pearson_homog),
    Statistic("modified_lrt_homog", "point", _batch_modified_lrt_homog),
    Statistic("vhat", "free", _batch_vhat, reflection_invariant=True),
    Statistic("cochran_modified", "free", _batch_cochran_modified, reflection_invariant=True),
    Statistic("debiased_cochran_v1", "free", _batch_debiased_cochran_v1, reflection_invariant=True),
    Statistic("debiased_cochran_v2", "free", _batch_debiased_cochran_v2, reflection_invariant=True),
]:
    register(_s)


def get_statistic(name: str) -> Statistic:
    try:
        return STATISTICS[name]
    except KeyError:
        raise KeyError(
            f"unknown statistic {name!r}; known: {', '.join(sorted(STATISTICS))}"
        ) from None


# -- Dataset-level API ------------------------------------------------------


@dataclass(frozen=True)
class Fingerprints:
    counts: np.ndarray
    total: int


def fingerprints(data: Dataset) -> Fingerprints:
    tt = _common_trials(data.t, "fingerprints")
    counts = fingerprint_counts(data.x[None, :], tt)[0]
    return Fingerprints(counts=counts, total=data.n)


def _gof_null(null) -> MixingNull:
    null = _as_null(null)
    return MixingNull(null_mixing(null))


def stat_w1_plugin(data: Dataset, null) -> float:
    return STATISTICS["w1_plugin"](data, _gof_null(null))


def stat_debiased_pearson(data: Dataset, null) -> float:
    return STATISTICS["debiased_pearson"](data, _gof_null(null))


def stat_modified_pearson_gof(data: Dataset, null, gamma: float = DEFAULT_GAMMA) -> float:
    return STATISTICS["modified_pearson_gof"](data, _gof_null(null), gamma)


def stat_modified_lrt_gof(data: Dataset, null, gamma: float = DEFAULT_GAMMA) -> float:
    return STATISTICS["modified_lrt_gof"](data, _gof_null(null), gamma)


def stat_mean_t1(data: Dataset, p0: float) -> float:
    return STATISTICS["mean_t1"](data, PointNull(p0))


def stat_debiased_l2_t2(data: Dataset, p0: float) -> float:
    return STATISTICS["debiased_l2_t2"](data, PointNull(p0))


def stat_l2(data: Dataset, p0: float) -> float:
    return STATISTICS["l2"](data, PointNull(p0))


def stat_modified_pearson_homog(data: Dataset, p0: float, use_variance_norm: bool = False) -> float:
    x, t = data.x[None, :], data.t
    return float(_batch_modified_pearson_homog(x, t, PointNull(p0).p0, DEFAULT_GAMMA, use_variance_norm)[0])


def stat_modified_lrt_homog(data: Dataset, p0: float, gamma: float = DEFAULT_GAMMA) -> float:
    return STATISTICS["modified_lrt_homog"](data, PointNull(p0), gamma)


def stat_vhat(data: Dataset) -> float:
    return STATISTICS["vhat"](data)


def stat_muhat(data: Dataset) -> float:
    return float(_batch_muhat(data.x[None, :], data.t, None, DEFAULT_GAMMA)[0])


def pooled_mean(data: Dataset) -> float:
    return float(data.x.sum() / data.t.sum())


def stat_cochran_modified(data: Dataset, gamma: float = DEFAULT_GAMMA) -> float:
    return STATISTICS["cochran_modified"](data, None, gamma)


def stat_debiased_cochran_v1(data: Dataset, gamma: float = DEFAULT_GAMMA) -> float:
    return STATISTICS["debiased_cochran_v1"](data, None, gamma)


def stat_debiased_cochran_v2(data: Dataset, gamma: float = DEFAULT_GAMMA) -> float:
    return STATISTICS["debiased_cochran_v2"](data, None, gamma)


def stat_debiased_cochran_split(
    first: Dataset, second: Dataset, gamma: float = DEFAULT_GAMMA
) -> float:
    """Sample-split form: variance estimate from one half, scale from the other."""
    return stat_vhat(first) / max(stat_muhat(second), gamma)


def vhat_pairwise(data: Dataset) -> float:
    """V-hat by explicit enumeration of pairs (O(n^2)); reference form."""
    x, t = data.x, data.t
    n = data.n
    if n < 2 or np.any(t < 2):
        raise StatisticError("vhat needs n >= 2 and every t >= 2")
    a = [math.comb(int(xi), 2) / math.comb(int(ti), 2) for xi, ti in zip(x, t)]
    r = [xi / ti for xi, ti in zip(x, t)]
    terms = [(a[i] + a[j] - 2 * r[i] * r[j]) / 2 for i in range(n) for j in range(i + 1, n)]
    return math.fsum(terms) / math.comb(n, 2)


def muhat_pairwise(data: Dataset) -> float:
    x, t = data.x, data.t
    n = data.n
    if n < 2:
        raise StatisticError("muhat needs n >= 2")
    r = [xi / ti for xi, ti in zip(x, t)]
    terms = [(r[i] + r[j] - 2 * r[i] * r[j]) / 2 for i in range(n) for j in range(i + 1, n)]
    return math.fsum(terms) / math.comb(n, 2)
