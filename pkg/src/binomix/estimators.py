"""Estimators of the mixing distribution on a fixed support grid.

The NPMLE uses multiplicative EM updates, which keep the weights on the
simplex and never decrease the log-likelihood. The method of moments is an
L1 moment-fitting linear program solved with HiGHS.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from binomix.mixture import Dataset, MixingDistribution, w1
from binomix.statistics import DEFAULT_GAMMA, Statistic, register

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    points: np.ndarray = field(default_factory=lambda: np.arange(101) / 100)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or len(p) < 2:
            raise ValueError("grid needs at least two points")
        if np.any(np.diff(p) <= 0):
            raise ValueError("grid points must be strictly increasing")
        if p[0] != 0.0 or p[-1] != 1.0:
            raise ValueError("grid must include both endpoints 0 and 1")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def uniform(cls, size: int = 101) -> "GridSpec":
        if size < 2:
            raise ValueError("grid size must be at least 2")
        return cls(np.arange(size) / (size - 1))


def empirical_mixing(data: Dataset) -> MixingDistribution:
    return MixingDistribution(data.x / data.t, np.ones(data.n))


# -- NPMLE --------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    mixing: MixingDistribution
    iterations: int
    objective: float
    converged: bool = True

    def to_dict(self) -> dict:
        return {
            **self.mixing.to_dict(),
            "metadata": {
                "iterations": self.iterations,
                "objective": self.objective,
                "converged": self.converged,
            },
        }


def _cells(profile: np.ndarray) -> tuple[np.ndarray, np.ndarray, dict[int, int]]:
    """All (x, t) outcome cells for the distinct trial counts of a profile."""
    ts = np.unique(profile)
    xs, tcol, offset = [], [], {}
    for t in ts:
        offset[int(t)] = len(xs)
        xs.extend(range(int(t) + 1))
        tcol.extend([int(t)] * (int(t) + 1))
    return np.array(xs), np.array(tcol), offset


def _cell_counts(x: np.ndarray, profile: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs, tcol, offset = _cells(profile)
    x = np.atleast_2d(x)
    B = x.shape[0]
    U = len(xs)
    col = np.array([offset[int(t)] for t in profile])[None, :] + x
    flat = col + U * np.arange(B)[:, None]
    counts = np.bincount(flat.ravel(), minlength=B * U).reshape(B, U)
    return counts.astype(float), xs, tcol


def _em(counts: np.ndarray, lik: np.ndarray, gamma: float, max_iter: int, tol: float):
    """Batch EM. counts (B, U), lik (U, G). Returns weights, iterations, loglik, converged."""
    B = counts.shape[0]
    G = lik.shape[1]
    n = counts.sum(axis=1)
    w = np.full((B, G), 1.0 / G)
    mix = w @ lik.T
    ll = (counts * np.log(np.maximum(mix, gamma))).sum(axis=1)
    iters = np.zeros(B, dtype=np.int64)
    active = np.ones(B, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        c, wa, ma = counts[idx], w[idx], mix[idx]
        ratio = np.where(c > 0, c / np.maximum(ma, 1e-300), 0.0)
        wa = wa * (ratio @ lik) / n[idx, None]
        wa /= wa.sum(axis=1, keepdims=True)
        ma = wa @ lik.T
        new = (c * np.log(np.maximum(ma, gamma))).sum(axis=1)
        old = ll[idx]
        if np.any(new < old - 1e-9 * np.maximum(1.0, np.abs(old))):
            raise ArithmeticError("EM log-likelihood decreased; numerical breakdown")
        w[idx], mix[idx], ll[idx] = wa, ma, new
        iters[idx] += 1
        done = np.abs(new - old) <= tol * np.maximum(np.abs(old), 1e-300)
        active[idx[done]] = False
    return w, iters, ll, ~active


def _likelihood(xs: np.ndarray, ts: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return stats.binom.pmf(xs[:, None], ts[:, None], grid[None, :])


def npmle_fit(
    data: Dataset,
    grid: GridSpec | None = None,
    gamma: float = DEFAULT_GAMMA,
    max_iter: int = 5000,
    tol: float = 1e-10,
) -> FitResult:
    grid = grid or GridSpec()
    counts, xs, ts = _cell_counts(data.x[None, :], data.t)
    used = counts[0] > 0
    lik = _likelihood(xs[used], ts[used], grid.points)
    w, iters, ll, conv = _em(counts[:, used], lik, gamma, max_iter, tol)
    if not conv[0]:
        log.info("NPMLE stopped at max_iter=%d before reaching tol=%g", max_iter, tol)
    return FitResult(
        MixingDistribution(grid.points, w[0]), int(iters[0]), float(ll[0] / data.n), bool(conv[0])
    )


def npmle(
    data: Dataset,
    grid: GridSpec | None = None,
    gamma: float = DEFAULT_GAMMA,
    max_iter: int = 5000,
    tol: float = 1e-10,
) -> MixingDistribution:
    return npmle_fit(data, grid, gamma, max_iter, tol).mixing


def npmle_loglik(data: Dataset, pi: MixingDistribution, gamma: float = DEFAULT_GAMMA) -> float:
    """Average truncated log-likelihood sum_i log max(gamma, E_pi Bin(t_i, p)(x_i)) / n."""
    lik = stats.binom.pmf(data.x[:, None], data.t[:, None], pi.support[None, :]) @ pi.weights
    return float(np.log(np.maximum(lik, gamma)).mean())


def npmle_batch(
    x: np.ndarray,
    profile: np.ndarray,
    grid: GridSpec | None = None,
    gamma: float = DEFAULT_GAMMA,
    max_iter: int = 5000,
    tol: float = 1e-10,
) -> np.ndarray:
    """NPMLE weights for every row of a (B, n) count array; returns (B, G)."""
    grid = grid or GridSpec()
    counts, xs, ts = _cell_counts(x, profile)
    used = counts.sum(axis=0) > 0
    lik = _likelihood(xs[used], ts[used], grid.points)
    w, _, _, _ = _em(counts[:, used], lik, gamma, max_iter, tol)
    return w


# -- method of moments -------------------------------------------------------


def _unbiased_moment_rows(x: np.ndarray, t: np.ndarray, J: int) -> np.ndarray:
    """(B, J) array of pooled unbiased moment estimates; NaN where no record has t >= j."""
    x = np.atleast_2d(x).astype(float)
    t = np.asarray(t, dtype=float)
    out = np.full((x.shape[0], J), np.nan)
    ratio = np.ones_like(x)
    for j in range(1, J + 1):
        ok = t >= j
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = ratio * np.where(ok, (x - (j - 1)) / (t - (j - 1)), 0.0)
        ratio = np.clip(ratio, 0.0, None)
        if ok.any():
            out[:, j - 1] = ratio[:, ok].sum(axis=1) / ok.sum()
    return out


def unbiased_moments(data: Dataset, J: int) -> np.ndarray:
    """m-hat_j = mean of C(x_i, j) / C(t_i, j) over records with t_i >= j, j = 1..J."""
    if J < 1:
        raise ValueError("J must be at least 1")
    return _unbiased_moment_rows(data.x[None, :], data.t, J)[0]


def _mom_lp(mhat: np.ndarray, grid: np.ndarray, method: str = "highs"):
    J = len(mhat)
    use = np.flatnonzero(~np.isnan(mhat))
    # j = 0 row is inert (both sides equal 1) but kept in the objective
    powers = np.concatenate(([0], use + 1))
    target = np.concatenate(([1.0], mhat[use]))
    A = grid[None, :] ** powers[:, None]
    G, K = len(grid), len(powers)
    c = np.concatenate((np.zeros(G), np.ones(K)))
    eye = np.eye(K)
    A_ub = np.block([[A, -eye], [-A, -eye]])
    b_ub = np.concatenate((target, -target))
    A_eq = np.concatenate((np.ones(G), np.zeros(K)))[None, :]
    res = optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=(0, None), method=method)
    if not res.success:
        raise RuntimeError(f"MOM linear program failed: {res.message}")
    w = np.clip(res.x[:G], 0.0, None)
    return w / w.sum(), float(res.fun)


def mom_fit(data: Dataset, grid: GridSpec | None = None) -> FitResult:
    grid = grid or GridSpec()
    J = int(data.t.max())
    w, obj = _mom_lp(unbiased_moments(data, J), grid.points)
    return FitResult(MixingDistribution(grid.points, w), 0, obj)


def mom(data: Dataset, grid: GridSpec | None = None) -> MixingDistribution:
    return mom_fit(data, grid).mixing


def mom_batch(x: np.ndarray, profile: np.ndarray, grid: GridSpec | None = None) -> np.ndarray:
    grid = grid or GridSpec()
    mh = _unbiased_moment_rows(x, profile, int(np.max(profile)))
    return np.stack([_mom_lp(row, grid.points)[0] for row in mh])


# -- distance-to-estimator statistics ------------------------------------------


def _grid_w1_rows(grid: np.ndarray, w: np.ndarray, pi0: MixingDistribution) -> np.ndarray:
    pts = np.union1d(grid, pi0.support)
    cw = np.cumsum(w, axis=1)
    idx = np.searchsorted(grid, pts, side="right") - 1
    f_est = np.where(idx >= 0, cw[:, np.maximum(idx, 0)], 0.0)
    f0 = pi0.cdf(pts)
    return (np.abs(f_est - f0[None, :])[:, :-1] * np.diff(pts)).sum(axis=1)


def _batch_dist_npmle(x, t, pi0, gamma):
    w = npmle_batch(x, t, gamma=gamma)
    return _grid_w1_rows(GridSpec().points, w, pi0)


def _batch_dist_mom(x, t, pi0, gamma):
    return _grid_w1_rows(GridSpec().points, mom_batch(x, t), pi0)


register(Statistic("dist_npmle", "gof", _batch_dist_npmle))
register(Statistic("dist_mom", "gof", _batch_dist_mom))


def stat_dist_to_estimator(data: Dataset, null, estimator: str = "npmle") -> float:
    if isinstance(null, MixingDistribution):
        pi0 = null
    else:
        pi0 = null.pi0
    if estimator == "npmle":
        est = npmle(data)
    elif estimator == "mom":
        est = mom(data)
    else:
        raise ValueError(f"unknown estimator {estimator!r}; use 'npmle' or 'mom'")
    return w1(est, pi0)
