"""Command-line interface: binomix {gof,homog,invert-ci,estimate,simulate,adversarial}.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from binomix import adversarial, calibration, estimators, simulate
from binomix.mixture import Dataset, MixingDistribution, w1
from binomix.rng import entropy_seed
from binomix.statistics import STATISTICS, MixingNull, PointNull, StatisticError

GOF_TESTS = sorted([s for s, v in STATISTICS.items() if v.kind == "gof"] + ["global_minimax"])
POINT_TESTS = sorted([s for s, v in STATISTICS.items() if v.kind == "point"] + ["local_minimax"])
FREE_TESTS = sorted([s for s, v in STATISTICS.items() if v.kind == "free"] + ["cochran_asymptotic"])


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, seed_required: bool = False) -> None:
    p.add_argument("--alpha", type=float, default=0.05, help="test level (default 0.05)")
    p.add_argument("--reps", type=int, default=calibration.DEFAULT_REPLICATES, help="calibration replicates B")
    p.add_argument("--seed", type=int, default=None, required=seed_required, help="root random seed")
    p.add_argument("--gamma", type=float, default=calibration.DEFAULT_GAMMA, help="truncation constant")
    p.add_argument("--grid", type=int, default=calibration.DEFAULT_GRID, help="point-mass grid size for composite nulls and CIs")
    p.add_argument("--out", default=None, help="output file (directory for simulate)")
    p.add_argument("--format", choices=["json", "csv"], default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-cache", action="store_true", help="bypass the calibration cache")
    p.add_argument("--json-errors", action="store_true", help="report errors as JSON on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="binomix", description="Tests for binomial random-effects models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gof", help="goodness of fit to a mixing distribution")
    p.add_argument("data", help="CSV with header x,t")
    p.add_argument("--null", required=True, help="mixing distribution JSON (support, weights)")
    p.add_argument("--test", choices=GOF_TESTS, default="global_minimax")
    _common(p)

    p = sub.add_parser("homog", help="homogeneity test against delta_p0 or all point masses")
    p.add_argument("data")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--p0", type=float)
    g.add_argument("--free", action="store_true", help="composite null of all point masses")
    p.add_argument("--test", choices=sorted(set(POINT_TESTS) | set(FREE_TESTS)), default=None)
    _common(p)

    p = sub.add_parser("invert-ci", help="confidence interval for a common effect by test inversion")
    p.add_argument("data")
    p.add_argument("--family", choices=sorted(calibration.CI_FAMILIES), default="local_minimax")
    _common(p)

    p = sub.add_parser("estimate", help="estimate the mixing distribution")
    p.add_argument("data")
    p.add_argument("--method", choices=["mle", "mom", "empirical"], default="mle")
    p.add_argument("--support-grid", type=int, default=101, help="estimator grid size")
    _common(p)

    p = sub.add_parser("simulate", help="power, critical-separation and null-distribution experiments")
    p.add_argument("experiment", choices=["power", "critsep", "statdist"])
    p.add_argument("--test", choices=simulate.TESTS, required=True)
    p.add_argument("--family", choices=adversarial.FAMILIES, default="mean-shift")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--k", type=int, default=8, help="moments matched by the moment-match family")
    p.add_argument("--eps", type=float, nargs="+", default=None, help="W1 separations for power")
    p.add_argument("--power-reps", type=int, default=1000, help="replicates per separation R")
    p.add_argument("--bins", type=int, default=50)
    _common(p, seed_required=True)

    p = sub.add_parser("adversarial", help="emit a null/alternative pair for a family")
    p.add_argument("family", choices=adversarial.FAMILIES)
    p.add_argument("--eps", type=float, default=0.0, help="W1 separation")
    p.add_argument("--p0", type=float, default=0.5)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--center", type=float, default=None)
    p.add_argument("--halfwidth", type=float, default=None)
    _common(p)
    return parser


# -- helpers ------------------------------------------------------------------------


def _load_data(path: str) -> Dataset:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such data file: {path}")
    try:
        return Dataset.from_csv(p)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def _load_null(path: str) -> MixingDistribution:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"no such null file: {path}")
    try:
        return MixingDistribution.from_dict(json.loads(p.read_text()))
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: {exc}") from None


def _seed(args) -> int:
    if args.seed is None:
        seed = entropy_seed()
        warnings.warn(f"no --seed given; using entropy seed {seed}", stacklevel=2)
        return seed
    if args.seed < 0:
        raise UsageError("--seed must be nonnegative")
    return args.seed


def _check_config(args) -> None:
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.reps < 100:
        raise UsageError("--reps must be at least 100")
    if args.threads < 1:
        raise UsageError("--threads must be at least 1")
    if args.grid < 3:
        raise UsageError("--grid must be at least 3")


def _cache(args):
    return None if args.no_cache else calibration.default_cache_dir()


def _emit(args, payload: dict, rows: list[dict] | None = None) -> None:
    if args.format == "csv" and rows is not None:
        text = simulate.rows_to_csv(rows)
    else:
        text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _report_rows(report: calibration.TestReport) -> list[dict]:
    return [{k: getattr(report, k) for k in ("statistic", "value", "threshold", "reject", "p_value")}]


# -- commands -----------------------------------------------------------------------


def cmd_gof(args) -> int:
    data, pi0 = _load_data(args.data), _load_null(args.null)
    seed, cache = _seed(args), _cache(args)
    if args.test == "global_minimax":
        report = calibration.run_global_minimax(data, pi0, args.alpha, args.reps, seed, args.threads, cache)
    else:
        table = calibration.calibrate_simple(
            args.test, MixingNull(pi0), data.n, data.t, args.alpha, args.reps, seed, args.gamma, args.threads, cache
        )
        report = calibration.run_test(args.test, data, table)
    _emit(args, report.to_dict(), _report_rows(report))
    return 0


def cmd_homog(args) -> int:
    data = _load_data(args.data)
    if args.free:
        test = args.test or "debiased_cochran_v2"
        if test not in FREE_TESTS:
            raise UsageError(f"--free needs one of: {', '.join(FREE_TESTS)}")
        if test == "cochran_asymptotic":
            report = calibration.cochran_asymptotic_test(data, args.alpha, args.gamma)
        else:
            table = calibration.calibrate_composite_pointmass(
                test, args.grid, data.n, data.t, args.alpha, args.reps, _seed(args), args.gamma, args.threads, _cache(args)
            )
            report = calibration.run_test(test, data, table)
    else:
        if not 0 <= args.p0 <= 1:
            raise DataError(f"p0={args.p0} must lie in [0, 1]")
        test = args.test or "local_minimax"
        if test not in POINT_TESTS:
            raise UsageError(f"--p0 needs one of: {', '.join(POINT_TESTS)}")
        seed, cache = _seed(args), _cache(args)
        if test == "local_minimax":
            report = calibration.run_local_minimax(data, args.p0, args.alpha, args.reps, seed, args.threads, cache)
        else:
            table = calibration.calibrate_simple(
                test, PointNull(args.p0), data.n, data.t, args.alpha, args.reps, seed, args.gamma, args.threads, cache
            )
            report = calibration.run_test(test, data, table)
    _emit(args, report.to_dict(), _report_rows(report))
    return 0


def cmd_invert_ci(args) -> int:
    data = _load_data(args.data)
    seed = _seed(args)
    ci = calibration.invert_ci(data, args.family, args.alpha, args.reps, seed, args.grid, args.gamma, args.threads)
    payload = {**ci.to_dict(), "family": args.family, "alpha": args.alpha, "replicates": args.reps, "seed": seed}
    _emit(args, payload, [ci.to_dict()])
    return 0


def cmd_estimate(args) -> int:
    data = _load_data(args.data)
    grid = estimators.GridSpec.uniform(args.support_grid)
    if args.method == "empirical":
        pi = estimators.empirical_mixing(data)
        payload = {**pi.to_dict(), "metadata": {"method": "empirical"}}
    else:
        fit = estimators.npmle_fit(data, grid, args.gamma) if args.method == "mle" else estimators.mom_fit(data, grid)
        pi = fit.mixing
        payload = fit.to_dict()
        payload["metadata"]["method"] = args.method
        payload["metadata"]["grid_size"] = args.support_grid
    rows = [{"support": float(s), "weight": float(w)} for s, w in zip(pi.support, pi.weights)]
    _emit(args, payload, rows)
    return 0


def cmd_simulate(args) -> int:
    if args.seed < 0:
        raise UsageError("--seed must be nonnegative")
    fam = adversarial.FamilySpec(args.family, p0=args.p0, k=args.k)
    out_dir = Path(args.out or ".")
    fmt = args.format or "csv"
    if args.experiment == "power":
        seps = args.eps if args.eps is not None else list(np.linspace(0, fam.max_separation, 6))
        res = simulate.power_sweep(
            args.test, fam, seps, args.n, args.t, args.alpha, args.reps, args.power_reps,
            args.seed, args.gamma, args.threads, args.grid,
        )
        rows = res.rows()
    elif args.experiment == "critsep":
        res = simulate.critical_separation(
            args.test, fam, args.n, args.t, args.alpha, seed=args.seed, B_calib=args.reps,
            R=args.power_reps, gamma=args.gamma, threads=args.threads, grid_size=args.grid,
        )
        rows = [{k: getattr(res, k) for k in ("status", "estimate", "lower", "upper", "type_one")}]
    else:
        null = PointNull(args.p0)
        res = simulate.statistic_distribution(
            args.test, null, args.n, args.t, args.reps, args.seed, args.bins, args.gamma, args.threads
        )
        rows = res.rows()
    stem = simulate.output_stem(args.experiment, args.test, args.family, args.n, args.t)
    for p in simulate.write_outputs(stem, rows, res.to_dict(), out_dir, "both" if fmt == "json" else "csv"):
        print(p)
    return 0


def cmd_adversarial(args) -> int:
    fam = args.family
    if fam == "moment-match" and (args.center is not None or args.halfwidth is not None):
        pair = adversarial.moment_match_pair(
            args.k, 0.5 if args.center is None else args.center, 0.5 if args.halfwidth is None else args.halfwidth
        )
        null, alt = pair
        extra = {"constant": pair.constant}
    else:
        null, alt = adversarial.FamilySpec(fam, p0=args.p0, k=args.k).pair(args.eps)
        extra = {}
    payload = {"family": fam, "null": null.to_dict(), "alternative": alt.to_dict(), "w1": w1(null, alt), **extra}
    _emit(args, payload, None)
    return 0


COMMANDS = {
    "gof": cmd_gof,
    "homog": cmd_homog,
    "invert-ci": cmd_invert_ci,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "adversarial": cmd_adversarial,
}


def _fail(code: int, exc: Exception, json_errors: bool) -> int:
    kind = "usage" if code == 1 else "data"
    if json_errors:
        sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")
    else:
        sys.stderr.write(f"binomix: {kind} error: {exc}\n")
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    json_errors = "--json-errors" in argv
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
        _check_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(1, exc, json_errors)
    except (DataError, StatisticError, ValueError, FileNotFoundError) as exc:
        return _fail(2, exc, json_errors)


if __name__ == "__main__":
    sys.exit(main())
