"""How the constant prior mean moves the EI maximiser on a 1-d toy.

Fits one GP per constant mean (Min, Arithmetic, Median, Max) to the same five
standardised observations with shared hyperparameters, writes the posterior
mean, standard deviation and EI on a dense grid to CSV, and prints the EI
argmax with its distance to the nearest observation.

    python3 scripts/mean_steering.py --csv steering.csv
"""
import argparse
import csv

import numpy as np

from priormean.acquisition import AcquisitionSpec, expected_improvement, maximise_acquisition
from priormean.gp import Dataset, KernelHyperparams, build_posterior
from priormean.means import fit_constant

X = np.array([[0.05], [0.2], [0.45], [0.6], [0.75]])
KINDS = ("Min", "Arithmetic", "Median", "Max")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--csv", default=None, help="write grid values here")
    ap.add_argument("--theta0", type=float, default=1.0)
    ap.add_argument("--theta1", type=float, default=8.0)
    args = ap.parse_args()

    raw = np.sin(6 * X[:, 0]) + 0.5 * X[:, 0]
    data = Dataset(X, (raw - raw.mean()) / raw.std())
    theta = KernelHyperparams(args.theta0, args.theta1)
    grid = np.linspace(0, 1, 501)[:, None]
    cols = {"x": grid[:, 0]}
    for kind in KINDS:
        mean = fit_constant(kind, data.f)
        gp = build_posterior(data, mean, theta)
        mu, s2 = gp.predict_batch(grid)
        cols[f"{kind}_mu"], cols[f"{kind}_sd"] = mu, np.sqrt(s2)
        cols[f"{kind}_ei"] = expected_improvement(mu, np.sqrt(s2), data.f.min())
        x = maximise_acquisition(gp, AcquisitionSpec("EI"), float(data.f.min()), data.t, seed=0)
        gap = np.min(np.abs(X[:, 0] - x[0]))
        print(f"{kind:<10} c = {mean.c:+.3f}  EI argmax x = {x[0]:.4f}  nearest datum {gap:.4f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            w.writerows(zip(*cols.values()))


if __name__ == "__main__":
    main()
