"""Empirical type-I error of every shipped test over a grid of point-mass nulls."""

import itertools

import numpy as np

from _common import budgets, parser
from binomix.mixture import MixingDistribution
from binomix.simulate import TESTS, build_test, rejection_rate, rows_to_csv


def main():
    p = parser(__doc__, B=5000, R=2000)
    p.add_argument("--p0", type=float, nargs="+", default=[0.0, 0.01, 0.1, 0.5])
    p.add_argument("--t", type=int, nargs="+", default=[2, 8])
    p.add_argument("--n", type=int, nargs="+", default=[50, 200])
    p.add_argument("--tests", nargs="+", default=[s for s in TESTS if not s.startswith("dist_")])
    p.add_argument("--grid", type=int, default=201)
    args = p.parse_args()
    B, R = budgets(args)
    band = args.alpha + 3 * np.sqrt(args.alpha * (1 - args.alpha) / R)
    rows = []
    for test, p0, t, n in itertools.product(args.tests, args.p0, args.t, args.n):
        null = MixingDistribution.point_mass(p0)
        dec = build_test(test, null, np.full(n, t), args.alpha, B, args.seed, threads=args.threads, grid_size=args.grid)
        rate = rejection_rate(dec, null, np.full(n, t), R, args.seed, "typeI", args.threads)
        rows.append({"test": test, "p0": p0, "t": t, "n": n, "rate": rate, "valid": bool(rate <= band)})
        print(rows[-1])
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "type_one_matrix.csv").write_text(rows_to_csv(rows))


if __name__ == "__main__":
    main()
