"""Scaled Max-vs-Min comparison on Ackley (d = 5) with EI.

Runs (or resumes) the grid in configs/minimal.yaml, writes the comparison
table and convergence traces, and prints the paired one-sided test of
Max < Min on terminal regret.

    python3 scripts/reproduce_minimal.py --out runs/minimal [--jobs 2]
"""
import argparse
from pathlib import Path

import numpy as np

from priormean.analysis import median_mad, wilcoxon_one_sided
from priormean.cli import MANIFEST, cmd_report, cmd_run, load_records

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "minimal.yaml"))
    ap.add_argument("--out", default="runs/minimal")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--alpha", type=float, default=0.1)
    args = ap.parse_args()

    out = Path(args.out)
    status = cmd_run(args.config, out, args.jobs, resume=(out / MANIFEST).exists())
    for path in cmd_report(out, "table", args.alpha) + cmd_report(out, "convergence"):
        print("wrote", path)

    records, _ = load_records(out)
    regret = {}
    for kind in ("Max", "Min"):
        runs = sorted((r for r in records if r.config.mean_kind == kind), key=lambda r: r.config.repeat)
        regret[kind] = np.array([r.terminal_regret for r in runs])
        med, mad = median_mad(regret[kind])
        print(f"{kind:<4} median {med:.2e}  MAD {mad:.2e}  (n={len(runs)})")
    res = wilcoxon_one_sided(regret["Max"], regret["Min"])
    verdict = "Max better" if res.p < args.alpha else "no significant difference"
    print(f"one-sided Wilcoxon Max < Min: p = {res.p:.4f} ({'exact' if res.exact else 'normal approx.'}); {verdict}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
