"""Model-error check on the 1-d smooth toy: one BO run, then the NRMSE of
each mean kind's GP refitted on the run's first 100 evaluations."""
import argparse

from priormean.analysis import run_nrmse_study
from priormean.engine import RunConfig, run_bo
from priormean.means import MEAN_KINDS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=9)
    ap.add_argument("--means", nargs="+", default=list(MEAN_KINDS))
    args = ap.parse_args()
    base = run_bo(RunConfig("ToySmooth1D", "Arithmetic", "EI", M=2, T=100, seed=args.seed))
    records = []
    for kind in args.means:
        # same evaluations, relabelled so each kind refits on identical data
        rec = type(base)(RunConfig("ToySmooth1D", kind, "EI", M=2, T=100, seed=args.seed), base.f_star,
                         base.iterations)
        records.append(rec)
    study = run_nrmse_study(records)
    for row in study.rows:
        print(f"{row['mean']:<13} NRMSE {row['nrmse']:.4f}")


if __name__ == "__main__":
    main()
