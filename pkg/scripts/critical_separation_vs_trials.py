"""Empirical critical separation as a function of the number of trials t.

Mean-matched alternatives should get easier with t; probability perturbations
should plateau. Tests that fail the type-I check are reported as "invalid".
"""

from _common import budgets, parser
from binomix.adversarial import FamilySpec
from binomix.simulate import critical_separation, rows_to_csv

CASES = (
    ("debiased_l2_t2", FamilySpec("mean-matched", p0=0.5)),
    ("local_minimax", FamilySpec("mean-matched", p0=0.5)),
    ("local_minimax", FamilySpec("mean-shift", p0=0.1)),
    ("w1_plugin", FamilySpec("prob-perturb")),
    ("debiased_pearson", FamilySpec("prob-perturb")),
)


def main():
    p = parser(__doc__.splitlines()[0], B=5000, R=1000)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--t", type=int, nargs="+", default=[2, 4, 8, 16, 32, 64])
    args = p.parse_args()
    B, R = budgets(args)
    rows = []
    for test, fam in CASES:
        for t in args.t:
            res = critical_separation(test, fam, args.n, t, args.alpha, seed=args.seed, B_calib=B, R=R, threads=args.threads)
            rows.append({"test": test, "family": fam.kind, "p0": fam.p0, "n": args.n, "t": t, "status": res.status,
                         "estimate": res.estimate, "lower": res.lower, "upper": res.upper, "type_one": res.type_one})
            print(rows[-1])
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / f"critsep_n{args.n}.csv").write_text(rows_to_csv(rows))


if __name__ == "__main__":
    main()
