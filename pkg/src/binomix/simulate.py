"""Power curves, critical separation and null-distribution summaries.

Tests are compiled into batch deciders: calibrate once under the null, then
map a (rows, n) block of counts to a boolean reject vector. Alternatives at
every separation draw from the same (seed, tag, block) streams, so power
curves use common random numbers across the separation grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from binomix import estimators as _estimators  # noqa: F401  registers dist_* statistics
from binomix.adversarial import FamilySpec
from binomix.calibration import (
    DEFAULT_GAMMA,
    calibrate_composite_pointmass,
    calibrate_simple,
    cochran_asymptotic_threshold,
)
from binomix.mixture import MixingDistribution, draw_counts
from binomix.rng import BLOCK_SIZE, blocks, stream
from binomix.statistics import STATISTICS, MixingNull, PointNull, get_statistic

COMBINED = {
    "local_minimax": ("mean_t1", "debiased_l2_t2"),
    "global_minimax": ("debiased_pearson", "w1_plugin"),
}
TESTS = tuple(sorted(set(STATISTICS) | set(COMBINED) | {"cochran_asymptotic"}))


@dataclass
class Decider:
    """A calibrated test as a function of a (rows, n) count block."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    thresholds: dict = field(default_factory=dict)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.fn(x)


def _null_for(stat, null: MixingDistribution):
    if stat.kind == "gof":
        return MixingNull(null)
    if stat.kind == "point":
        if not null.is_point_mass:
            raise ValueError(f"{stat.name} needs a point-mass null; the family null has {len(null)} atoms")
        return PointNull(float(null.support[0]))
    return None


def build_test(
    name: str,
    null: MixingDistribution,
    trials,
    alpha: float,
    B: int,
    seed: int,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
    grid_size: int = 201,
) -> Decider:
    trials = np.asarray(trials, dtype=np.int64)
    n = len(trials)
    if name == "cochran_asymptotic":
        stat = get_statistic("cochran_modified")
        thr = cochran_asymptotic_threshold(n, alpha)
        return Decider(name, lambda x: stat.batch(x, trials, None, gamma) > thr, {name: thr})
    parts = COMBINED.get(name, (name,))
    level = alpha / len(parts)
    pieces = []
    for part in parts:
        stat = get_statistic(part)
        if stat.kind == "free":
            table = calibrate_composite_pointmass(stat, grid_size, n, trials, level, B, seed, gamma, threads)
        else:
            table = calibrate_simple(stat, _null_for(stat, null), n, trials, level, B, seed, gamma, threads)
        pieces.append((stat, table))

    def fn(x):
        out = np.zeros(x.shape[0], dtype=bool)
        for stat, table in pieces:
            out |= stat.batch(x, trials, table.null, gamma) > table.threshold
        return out

    return Decider(name, fn, {t.statistic: t.threshold for _, t in pieces})


def rejection_rate(
    decider: Decider,
    mixing: MixingDistribution,
    trials,
    R: int,
    seed: int,
    tag: str,
    threads: int = 1,
) -> float:
    trials = np.asarray(trials, dtype=np.int64)

    def run(block):
        k, rows = block
        x = draw_counts(stream(seed, tag, k), mixing, trials, BLOCK_SIZE)[:rows]
        return int(decider(x).sum())

    plan = blocks(R, BLOCK_SIZE)
    if threads > 1 and len(plan) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(run, plan))
    else:
        hits = sum(run(b) for b in plan)
    return hits / R


def _se(p: float, R: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / R)


# -- power curves ------------------------------------------------------------------


@dataclass
class PowerCurve:
    test: str
    family: dict
    separations: list
    power: list
    se: list
    n: int
    t: int
    alpha: float
    B: int
    R: int
    seed: int

    def rows(self) -> list[dict]:
        return [
            {"separation": s, "power": p, "se": e} for s, p, e in zip(self.separations, self.power, self.se)
        ]

    def to_dict(self) -> dict:
        return asdict(self)


def power_sweep(
    test: str,
    family: FamilySpec,
    separations: Sequence[float],
    n: int,
    t: int,
    alpha: float = 0.05,
    B_calib: int = 10_000,
    R_power: int = 1000,
    seed: int = 0,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
    grid_size: int = 201,
) -> PowerCurve:
    seps = [float(s) for s in separations]
    if any(b <= a for a, b in zip(seps, seps[1:])):
        raise ValueError("separations must be strictly increasing")
    trials = np.full(n, int(t))
    deciders: dict = {}
    power, se = [], []
    for eps in seps:
        null, alt = family.pair(eps)
        key = null.to_json()
        if key not in deciders:
            deciders[key] = build_test(test, null, trials, alpha, B_calib, seed, gamma, threads, grid_size)
        p = rejection_rate(deciders[key], alt, trials, R_power, seed, "power", threads)
        power.append(p)
        se.append(_se(p, R_power))
    return PowerCurve(test, family.to_dict(), seps, power, se, n, int(t), alpha, B_calib, R_power, seed)


# -- critical separation -----------------------------------------------------------


@dataclass
class CritSepResult:
    test: str
    family: dict
    n: int
    t: int
    alpha: float
    status: str  # "ok", "unreachable" or "invalid"
    estimate: float | None
    lower: float | None
    upper: float | None
    type_one: float
    probes: list
    R: int
    B: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def critical_separation(
    test: str,
    family: FamilySpec,
    n: int,
    t: int,
    alpha: float = 0.05,
    target_power: float | None = None,
    seed: int = 0,
    B_calib: int = 10_000,
    R: int = 1000,
    width: float = 0.01,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
    grid_size: int = 201,
) -> CritSepResult:
    """Smallest W1 separation at which power reaches the target, by bisection."""
    target = 1.0 - alpha if target_power is None else target_power
    trials = np.full(n, int(t))
    cache: dict = {}
    probes: list = []

    def decider(null):
        key = null.to_json()
        if key not in cache:
            cache[key] = build_test(test, null, trials, alpha, B_calib, seed, gamma, threads, grid_size)
        return cache[key]

    def power(eps):
        null, alt = family.pair(eps)
        p = rejection_rate(decider(null), alt, trials, R, seed, "power", threads)
        probes.append([eps, p])
        return p

    null0, _ = family.pair(0.0)
    size = rejection_rate(decider(null0), null0, trials, R, seed, "typeI", threads)
    common = dict(test=test, family=family.to_dict(), n=n, t=int(t), alpha=alpha, type_one=size, R=R, B=B_calib, seed=seed)
    if size > alpha + 3 * _se(alpha, R):
        return CritSepResult(status="invalid", estimate=None, lower=None, upper=None, probes=probes, **common)
    lo, hi = 0.0, family.max_separation
    if power(hi) < target:
        return CritSepResult(status="unreachable", estimate=None, lower=None, upper=None, probes=probes, **common)
    tol = max(width, 2 * _se(target, R) * hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if power(mid) >= target:
            hi = mid
        else:
            lo = mid
    return CritSepResult(status="ok", estimate=0.5 * (lo + hi), lower=lo, upper=hi, probes=probes, **common)


# -- null-distribution summaries ----------------------------------------------------


@dataclass
class StatDistSummary:
    statistic: str
    null: dict
    n: int
    t: int
    B: int
    seed: int
    mean: float
    variance: float
    se: float
    quantiles: dict
    bin_edges: list
    counts: list

    def to_dict(self) -> dict:
        return asdict(self)

    def rows(self) -> list[dict]:
        return [
            {"bin_lo": lo, "bin_hi": hi, "count": c}
            for lo, hi, c in zip(self.bin_edges[:-1], self.bin_edges[1:], self.counts)
        ]


def statistic_distribution(
    statistic: str,
    null,
    n: int,
    t: int,
    B: int = 10_000,
    seed: int = 0,
    bins: int = 50,
    gamma: float = DEFAULT_GAMMA,
    threads: int = 1,
) -> StatDistSummary:
    from binomix.calibration import simulate_null_statistics
    from binomix.statistics import _as_null, null_mixing

    stat = get_statistic(statistic)
    null = _as_null(null)
    mixing = null_mixing(null)
    vals = simulate_null_statistics({stat.name: (stat, null)}, mixing, np.full(n, int(t)), B, seed, gamma, threads)[stat.name]
    counts, edges = np.histogram(vals, bins=bins)
    qs = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99]
    return StatDistSummary(
        statistic=stat.name,
        null=null.to_dict(),
        n=n,
        t=int(t),
        B=B,
        seed=seed,
        mean=float(vals.mean()),
        variance=float(vals.var(ddof=1)),
        se=float(vals.std(ddof=1) / math.sqrt(B)),
        quantiles={str(q): float(v) for q, v in zip(qs, np.quantile(vals, qs))},
        bin_edges=[float(e) for e in edges],
        counts=[int(c) for c in counts],
    )


# -- output -----------------------------------------------------------------------


def output_stem(experiment: str, test: str, family: str, n: int, t: int) -> str:
    return f"{experiment}_{test}_{family}_n{n}_t{t}"


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def write_outputs(stem: str, rows: list[dict], meta: dict, out_dir: Path, fmt: str = "csv") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        p = out_dir / f"{stem}.csv"
        p.write_text(rows_to_csv(rows))
        written.append(p)
    if fmt in ("json", "both"):
        p = out_dir / f"{stem}.json"
        p.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        written.append(p)
    return written
