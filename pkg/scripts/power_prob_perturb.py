"""Power of the goodness-of-fit tests under probability perturbations of 1/2 delta_0 + 1/2 delta_1.

The data only ever take the values 0 and t, so the curves should not move with t.
Writes one CSV per (test, t).
"""

import numpy as np

from _common import budgets, parser
from binomix.adversarial import FamilySpec
from binomix.simulate import output_stem, power_sweep, write_outputs

TESTS = ("w1_plugin", "debiased_pearson", "modified_pearson_gof", "modified_lrt_gof", "global_minimax")


def main():
    p = parser(__doc__.splitlines()[0], B=10_000, R=1000)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--t", type=int, nargs="+", default=[2, 8, 32])
    args = p.parse_args()
    B, R = budgets(args)
    fam = FamilySpec("prob-perturb")
    seps = np.round(np.linspace(0, 0.3, 13), 4)
    for test in TESTS:
        for t in args.t:
            curve = power_sweep(test, fam, seps, args.n, t, args.alpha, B, R, args.seed + t, threads=args.threads)
            for path in write_outputs(output_stem("power", test, fam.kind, args.n, t), curve.rows(), curve.to_dict(), args.out, "both"):
                print(path)


if __name__ == "__main__":
    main()
