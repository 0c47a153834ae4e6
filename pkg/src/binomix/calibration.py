"""Monte-Carlo calibration of test statistics, decisions and p-values.

Thresholds are the ceil(B(1-alpha))-th order statistic of B simulated null
values and a test rejects when the observed value is strictly larger. The
strict rule keeps discrete and degenerate statistics (a null that puts all
its mass on one value) at or below the nominal level.

Null replicates are drawn in fixed blocks of `rng.BLOCK_SIZE` rows from
streams keyed by (seed, tag, block). Block k never depends on how many
blocks there are, on the grid point being calibrated, or on which thread
runs it.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats as sps

from binomix.mixture import Dataset, MixingDistribution, draw_counts
from binomix.rng import BLOCK_SIZE, blocks, stream
from binomix.statistics import (
    DEFAULT_GAMMA,
    CompositePointMassNull,
    MixingNull,
    NullSpec,
    PointNull,
    Statistic,
    StatisticError,
    _as_null,
    get_statistic,
    null_from_dict,
    null_mixing,
    stat_cochran_modified,
)

log = logging.getLogger(__name__)

SCHEMA = 1
DEFAULT_REPLICATES = 10_000
DEFAULT_GRID = 201
NULL_TAG = "null"


def order_index(B: int, alpha: float) -> int:
    """Zero-based index of the ceil(B(1-alpha))-th order statistic."""
    k = math.ceil(B * (1.0 - alpha) - 1e-9)
    return min(max(k, 1), B) - 1


def profile_hash(trials) -> str:
    arr = np.ascontiguousarray(np.asarray(trials, dtype=np.int64))
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


# -- tables and reports ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuantileTable:
    statistic: str
    null: NullSpec
    alpha: float
    replicates: int
    seed: int
    n: int
    trials: tuple
    threshold: float
    gamma: float = DEFAULT_GAMMA
    values: np.ndarray | None = field(default=None, repr=False)
    grid: tuple | None = None
    grid_values: np.ndarray | None = field(default=None, repr=False)

    def p_value(self, observed: float) -> float:
        """Add-one Monte-Carlo p-value; the max over grid points for composite nulls."""
        if self.grid_values is not None:
            sims = self.grid_values
        elif self.values is not None:
            sims = self.values[None, :]
        else:
            raise ValueError("table was stored without simulated values")
        exceed = (sims >= observed).sum(axis=1)
        return float((1 + exceed.max()) / (self.replicates + 1))

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "statistic": self.statistic,
            "null": self.null.to_dict(),
            "alpha": self.alpha,
            "replicates": self.replicates,
            "seed": self.seed,
            "n": self.n,
            "trials": list(map(int, self.trials)),
            "threshold": float(self.threshold),
            "gamma": self.gamma,
            "grid": None if self.grid is None else [[float(p), float(q)] for p, q in self.grid],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict, values=None, grid_values=None) -> "QuantileTable":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported table schema {d.get('schema')!r}")
        grid = None if d["grid"] is None else tuple((p, q) for p, q in d["grid"])
        return cls(
            statistic=d["statistic"],
            null=null_from_dict(d["null"]),
            alpha=d["alpha"],
            replicates=d["replicates"],
            seed=d["seed"],
            n=d["n"],
            trials=tuple(d["trials"]),
            threshold=d["threshold"],
            gamma=d["gamma"],
            values=values,
            grid=grid,
            grid_values=grid_values,
        )


@dataclass(frozen=True)
class TestReport:
    statistic: str
    value: float
    threshold: float
    reject: bool
    p_value: float
    calibration: QuantileTable | None = None
    components: tuple = ()

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        out = {
            "statistic": self.statistic,
            "value": self.value,
            "threshold": self.threshold,
            "reject": self.reject,
            "p_value": self.p_value,
        }
        if self.calibration is not None:
            out["calibration"] = self.calibration.to_dict()
        if self.components:
            out["components"] = [c.to_dict() for c in self.components]
        return out


# -- cache ----------------------------------------------------------------------


def default_cache_dir() -> Path:
    return Path(os.environ.get("BINOMIX_CACHE", ".binomix-cache"))


def _cache_key(**fields) -> str:
    blob = json.dumps(fields, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def _cache_load(cache_dir: Path | None, key: str) -> QuantileTable | None:
    if cache_dir is None:
        return None
    meta, arrs = cache_dir / f"{key}.json", cache_dir / f"{key}.npz"
    if not (meta.exists() and arrs.exists()):
        return None
    try:
        with np.load(arrs) as z:
            values = z["values"] if "values" in z else None
            grid_values = z["grid_values"] if "grid_values" in z else None
        return QuantileTable.from_dict(json.loads(meta.read_text()), values, grid_values)
    except (OSError, ValueError, KeyError) as exc:
        log.warning("ignoring unreadable cache entry %s: %s", key, exc)
        return None


def _cache_store(cache_dir: Path | None, key: str, table: QuantileTable) -> None:
    if cache_dir is None:
        return
    cache_dir.mkdir(parents=True, exist_ok=True)
    arrays = {}
    if table.values is not None:
        arrays["values"] = table.values
    if table.grid_values is not None:
        arrays["grid_values"] = table.grid_values
    tmp = cache_dir / f"{key}.tmp.npz"
    np.savez(tmp, **arrays)
    tmp.replace(cache_dir / f"{key}.npz")
    (cache_dir / f"{key}.json").write_text(table.to_json(indent=1))


# -- null simulation ---------------------------------------------------------------


def _check_common(alpha: float, B: int, n: int, trials) -> np.ndarray:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha={alpha} must lie in (0, 1)")
    if B < 100:
        raise ValueError(f"need at least 100 replicates, got {B}")
    trials = np.asarray(trials, dtype=np.int64)
    if trials.ndim != 1 or len(trials) != n:
        raise ValueError(f"trials profile length {trials.size} does not match n={n}")
    if np.any(trials < 1):
        raise ValueError("trials must be positive")
    return trials


def simulate_null_statistics(
    jobs: dict[str, tuple[Statistic, object]],
    mixing: MixingDistribution,
    trials,
    B: int,
    seed: int,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
    tag: str = NULL_TAG,
) -> dict[str, np.ndarray]:
    """Simulate B datasets from `mixing` and evaluate every (statistic, null) job.

    All jobs see the same draws. Returns name -> (B,) array in replicate order.
    """
    trials = np.asarray(trials, dtype=np.int64)
    plan = blocks(B, BLOCK_SIZE)

    def run(block: tuple[int, int]) -> dict[str, np.ndarray]:
        k, rows = block
        x = draw_counts(stream(seed, tag, k), mixing, trials, BLOCK_SIZE)[:rows]
        return {name: s.batch(x, trials, null, gamma) for name, (s, null) in jobs.items()}

    if threads > 1 and len(plan) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, plan))
    else:
        parts = [run(b) for b in plan]
    return {name: np.concatenate([p[name] for p in parts]) for name in jobs}


def _table_from_values(statistic, null, alpha, B, seed, trials, gamma, values) -> QuantileTable:
    vals = np.sort(values)
    return QuantileTable(
        statistic=statistic,
        null=null,
        alpha=float(alpha),
        replicates=int(B),
        seed=int(seed),
        n=len(trials),
        trials=tuple(int(v) for v in trials),
        threshold=float(vals[order_index(B, alpha)]),
        gamma=gamma,
        values=vals,
    )


def calibrate_simple(
    statistic: str | Statistic,
    null,
    n: int,
    trials_profile,
    alpha: float = 0.05,
    B: int = DEFAULT_REPLICATES,
    seed: int = 0,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
    cache_dir: Path | str | None = None,
) -> QuantileTable:
    stat = get_statistic(statistic) if isinstance(statistic, str) else statistic
    null = _as_null(null)
    if isinstance(null, CompositePointMassNull):
        raise ValueError("calibrate_simple needs a simple null; use calibrate_composite_pointmass")
    trials = _check_common(alpha, B, n, trials_profile)
    cache_dir = None if cache_dir is None else Path(cache_dir)
    key = _cache_key(
        kind="simple", statistic=stat.name, null=null.to_dict(), n=n,
        profile=profile_hash(trials), alpha=alpha, B=B, seed=seed, gamma=gamma, schema=SCHEMA,
    )
    cached = _cache_load(cache_dir, key)
    if cached is not None:
        return cached
    values = simulate_null_statistics(
        {stat.name: (stat, null)}, null_mixing(null), trials, B, seed, gamma, threads
    )[stat.name]
    table = _table_from_values(stat.name, null, alpha, B, seed, trials, gamma, values)
    _cache_store(cache_dir, key, table)
    return table


def pointmass_grid(G: int) -> np.ndarray:
    if G < 3:
        raise ValueError(f"grid size must be at least 3, got {G}")
    return np.arange(G) / (G - 1)


def _grid_values(stat, G, trials, B, seed, gamma, threads, null_for) -> np.ndarray:
    """(G, B) simulated values over the point-mass grid, mirroring when allowed."""
    grid = pointmass_grid(G)
    out = np.empty((G, B))
    half = (G - 1) // 2
    todo = range(half + 1) if stat.reflection_invariant else range(G)
    for i in todo:
        p = float(grid[i])
        out[i] = simulate_null_statistics(
            {stat.name: (stat, null_for(p))},
            MixingDistribution.point_mass(p), trials, B, seed, gamma, threads,
        )[stat.name]
    if stat.reflection_invariant:
        for i in range(half + 1, G):
            out[i] = out[G - 1 - i]
    return out


def calibrate_composite_pointmass(
    statistic: str | Statistic,
    G: int = DEFAULT_GRID,
    n: int = 0,
    trials_profile=None,
    alpha: float = 0.05,
    B: int = DEFAULT_REPLICATES,
    seed: int = 0,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
    cache_dir: Path | str | None = None,
) -> QuantileTable:
    """Sup over the point-mass grid {0, 1/(G-1), ..., 1} of per-point thresholds."""
    stat = get_statistic(statistic) if isinstance(statistic, str) else statistic
    if stat.kind != "free":
        raise StatisticError(f"{stat.name} depends on p0; composite calibration needs a free statistic")
    trials = _check_common(alpha, B, n, trials_profile)
    grid = pointmass_grid(G)
    cache_dir = None if cache_dir is None else Path(cache_dir)
    key = _cache_key(
        kind="composite", statistic=stat.name, G=G, n=n, profile=profile_hash(trials),
        alpha=alpha, B=B, seed=seed, gamma=gamma, schema=SCHEMA,
    )
    cached = _cache_load(cache_dir, key)
    if cached is not None:
        return cached
    vals = np.sort(_grid_values(stat, G, trials, B, seed, gamma, threads, lambda p: None), axis=1)
    thr = vals[:, order_index(B, alpha)]
    table = QuantileTable(
        statistic=stat.name,
        null=CompositePointMassNull(),
        alpha=float(alpha),
        replicates=int(B),
        seed=int(seed),
        n=n,
        trials=tuple(int(v) for v in trials),
        threshold=float(thr.max()),
        gamma=gamma,
        grid=tuple((float(p), float(q)) for p, q in zip(grid, thr)),
        grid_values=vals,
    )
    _cache_store(cache_dir, key, table)
    return table


# -- decisions --------------------------------------------------------------------


def _check_profile(data: Dataset, table: QuantileTable) -> None:
    if data.n != table.n or tuple(int(v) for v in data.t) != tuple(table.trials):
        raise ValueError(
            f"calibration was built for n={table.n} and a different trials profile; "
            f"data has n={data.n}"
        )


def decide(value: float, table: QuantileTable) -> TestReport:
    return TestReport(
        statistic=table.statistic,
        value=float(value),
        threshold=table.threshold,
        reject=bool(value > table.threshold),
        p_value=table.p_value(value),
        calibration=table,
    )


def run_test(statistic: str | Statistic, data: Dataset, table: QuantileTable) -> TestReport:
    stat = get_statistic(statistic) if isinstance(statistic, str) else statistic
    if stat.name != table.statistic:
        raise ValueError(f"table calibrates {table.statistic!r}, not {stat.name!r}")
    _check_profile(data, table)
    return decide(stat(data, table.null, table.gamma), table)


def _bonferroni(name: str, parts: Sequence[TestReport]) -> TestReport:
    return TestReport(
        statistic=name,
        value=float("nan"),
        threshold=float("nan"),
        reject=any(r.reject for r in parts),
        p_value=min(1.0, len(parts) * min(r.p_value for r in parts)),
        components=tuple(parts),
    )


def run_local_minimax(
    data: Dataset,
    p0: float,
    alpha: float = 0.05,
    B: int = DEFAULT_REPLICATES,
    seed: int = 0,
    threads: int = 1,
    cache_dir=None,
) -> TestReport:
    """Mean test and debiased l2 test, each at alpha/2; reject if either does."""
    null = PointNull(p0)
    parts = []
    for name in ("mean_t1", "debiased_l2_t2"):
        table = calibrate_simple(name, null, data.n, data.t, alpha / 2, B, seed, threads=threads, cache_dir=cache_dir)
        parts.append(run_test(name, data, table))
    return _bonferroni("local_minimax", parts)


def run_global_minimax(
    data: Dataset,
    null,
    alpha: float = 0.05,
    B: int = DEFAULT_REPLICATES,
    seed: int = 0,
    threads: int = 1,
    cache_dir=None,
) -> TestReport:
    """Debiased Pearson and plug-in W1 tests, each at alpha/2; reject if either does."""
    null = _as_null(null)
    if isinstance(null, CompositePointMassNull):
        raise ValueError("global minimax test needs a mixing-distribution null")
    null = MixingNull(null_mixing(null))
    parts = []
    for name in ("debiased_pearson", "w1_plugin"):
        table = calibrate_simple(name, null, data.n, data.t, alpha / 2, B, seed, threads=threads, cache_dir=cache_dir)
        parts.append(run_test(name, data, table))
    return _bonferroni("global_minimax", parts)


def cochran_asymptotic_threshold(n: int, alpha: float) -> float:
    if n < 2:
        raise ValueError("Cochran's test needs n >= 2")
    return float(sps.chi2.ppf(1.0 - alpha, n - 1) / (n - 1))


def cochran_asymptotic_test(data: Dataset, alpha: float = 0.05, gamma: float = DEFAULT_GAMMA) -> TestReport:
    """Modified Cochran statistic against the chi-square(n-1)/(n-1) quantile."""
    thr = cochran_asymptotic_threshold(data.n, alpha)
    value = stat_cochran_modified(data, gamma)
    p = float(sps.chi2.sf(value * (data.n - 1), data.n - 1))
    return TestReport("cochran_asymptotic", value, thr, bool(value > thr), p)


# -- confidence intervals by test inversion -----------------------------------------


@dataclass(frozen=True)
class CITables:
    """Per-grid-point thresholds for the local-minimax family at one (n, profile)."""

    grid: np.ndarray
    thresholds: dict
    alpha: float
    replicates: int
    seed: int
    trials: tuple


CI_FAMILIES = {"local_minimax": ("mean_t1", "debiased_l2_t2")}


def ci_tables(
    n: int,
    trials_profile,
    family: str = "local_minimax",
    alpha: float = 0.05,
    B: int = DEFAULT_REPLICATES,
    seed: int = 0,
    G: int = DEFAULT_GRID,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
) -> CITables:
    if family not in CI_FAMILIES:
        raise ValueError(f"unknown CI family {family!r}; known: {', '.join(CI_FAMILIES)}")
    trials = _check_common(alpha, B, n, trials_profile)
    names = CI_FAMILIES[family]
    level = alpha / len(names)
    k = order_index(B, level)
    grid = pointmass_grid(G)
    thr = {name: np.empty(G) for name in names}
    for i, p in enumerate(grid):
        null = PointNull(float(p))
        sims = simulate_null_statistics(
            {name: (get_statistic(name), null) for name in names},
            MixingDistribution.point_mass(float(p)), trials, B, seed, gamma, threads,
        )
        for name in names:
            thr[name][i] = np.partition(sims[name], k)[k]
    return CITables(grid, thr, alpha, B, seed, tuple(int(v) for v in trials))


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float | None
    upper: float | None
    accepted: np.ndarray = field(repr=False)
    grid: np.ndarray = field(repr=False)

    @property
    def rejected_all(self) -> bool:
        return self.lower is None

    def contains(self, p: float) -> bool:
        return not self.rejected_all and self.lower <= p <= self.upper

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "rejected_all": self.rejected_all,
            "grid_size": int(len(self.grid)),
        }


def invert_ci(
    data: Dataset,
    family: str = "local_minimax",
    alpha: float = 0.05,
    B: int = DEFAULT_REPLICATES,
    seed: int = 0,
    G: int = DEFAULT_GRID,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
    tables: CITables | None = None,
) -> ConfidenceInterval:
    """Hull of the grid points p0 at which the family's test accepts."""
    if tables is None:
        tables = ci_tables(data.n, data.t, family, alpha, B, seed, G, gamma, threads)
    elif tables.trials != tuple(int(v) for v in data.t):
        raise ValueError("precomputed CI tables were built for a different trials profile")
    accept = np.ones(len(tables.grid), dtype=bool)
    x, t = data.x[None, :], data.t
    for name, thr in tables.thresholds.items():
        stat = get_statistic(name)
        vals = np.array([stat.batch(x, t, PointNull(float(p)), gamma)[0] for p in tables.grid])
        accept &= ~(vals > thr)
    idx = np.flatnonzero(accept)
    if idx.size == 0:
        return ConfidenceInterval(None, None, accept, tables.grid)
    if idx[-1] - idx[0] + 1 != idx.size:
        warnings.warn("accepted set is not an interval; reporting its hull", RuntimeWarning, stacklevel=2)
    return ConfidenceInterval(float(tables.grid[idx[0]]), float(tables.grid[idx[-1]]), accept, tables.grid)
