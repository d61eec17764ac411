"""Summaries and paired statistical comparisons of optimisation runs."""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .acquisition import norm_cdf
from .benchmarks import evaluate_batch, get_problem
from .design import latin_hypercube
from .engine import standardise
from .errors import InvalidArgumentError, PairingError, UndefinedRangeError
from .gp import Dataset, build_posterior, fit_hyperparameters
from .means import MEAN_KINDS, CVGrid, ForestParams, MeanFunctionSpec, fit_mean
from .seeding import derive_seed

EXACT_MAX_N = 12


def median_mad(values) -> tuple[float, float]:
    """Median and the (unscaled) median absolute deviation from it."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size == 0:
        raise InvalidArgumentError("median_mad of an empty sample")
    med = float(np.median(v))
    return med, float(np.median(np.abs(v - med)))


@dataclass(frozen=True)
class WilcoxonResult:
    p: float
    statistic: float  # sum of ranks of positive differences a - b
    n: int  # pairs left after dropping zero differences
    exact: bool
    degenerate: bool = False


def _exact_lower_tail(ranks: np.ndarray, w: float) -> float:
    """P(W+ <= w) under the null, ranks possibly tied (multiples of 1/2)."""
    r2 = np.rint(2.0 * ranks).astype(int)
    counts = np.zeros(int(r2.sum()) + 1)
    counts[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    w2 = int(np.rint(2.0 * w))
    return float(counts[: w2 + 1].sum() / counts.sum())


def _normal_lower_tail(ranks: np.ndarray, w: float) -> float:
    n = ranks.size
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    if var <= 0:
        return 1.0
    z = (w - mean + 0.5) / math.sqrt(var)
    return float(min(1.0, norm_cdf(z)))


def wilcoxon_one_sided(a, b, method: str = "auto") -> WilcoxonResult:
    """Paired signed-rank test of H1: ``a`` tends to be smaller than ``b``.

    Zero differences are dropped and tied magnitudes share average ranks.
    ``method="auto"`` enumerates the null exactly for up to 12 pairs and uses
    the tie- and continuity-corrected normal approximation above that.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape or a.size == 0:
        raise InvalidArgumentError("wilcoxon needs two non-empty samples of equal length")
    diff = a - b
    diff = diff[diff != 0.0]
    n = diff.size
    if n == 0:
        return WilcoxonResult(1.0, 0.0, 0, True, degenerate=True)
    ranks = rankdata(np.abs(diff))
    w = float(ranks[diff > 0].sum())
    exact = method == "exact" or (method == "auto" and n <= EXACT_MAX_N)
    if method not in ("auto", "exact", "approx"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    p = _exact_lower_tail(ranks, w) if exact else _normal_lower_tail(ranks, w)
    return WilcoxonResult(min(p, 1.0), w, n, exact)


def holm_bonferroni(pvals, alpha: float = 0.05) -> np.ndarray:
    """Step-down rejection flags, in the input order."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    p = np.asarray(pvals, dtype=float).reshape(-1)
    m = p.size
    reject = np.zeros(m, dtype=bool)
    for i, idx in enumerate(np.argsort(p, kind="stable")):
        if p[idx] > alpha / (m - i):
            break
        reject[idx] = True
    return reject


@dataclass
class CellRow:
    kind: str
    median: float
    mad: float
    n: int
    best: bool = False
    equivalent: bool = False
    p_value: float | None = None


@dataclass
class ComparisonTable:
    """Per (problem, acquisition) rows of median/MAD with best and equivalence flags."""

    cells: dict = field(default_factory=dict)
    alpha: float = 0.05
    value_name: str = "regret"

    def problems(self, acquisition=None):
        seen = []
        for p, a in self.cells:
            if (acquisition is None or a == acquisition) and p not in seen:
                seen.append(p)
        return seen

    def acquisitions(self):
        return sorted({a for _, a in self.cells})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["problem", "acquisition", "mean", "n", "median", "mad", "best", "equivalent", "p_value"])
        for (prob, acq), rows in self.cells.items():
            for r in rows:
                w.writerow([prob, acq, r.kind, r.n, f"{r.median:.2e}", f"{r.mad:.2e}", int(r.best),
                            int(r.equivalent), "" if r.p_value is None else f"{r.p_value:.4g}"])
        return buf.getvalue()

    def to_text(self, acquisition: str) -> str:
        """Kinds as rows, problems as Median/MAD column pairs.

        ``*`` marks the lowest median, ``+`` those statistically equivalent to it.
        """
        probs = self.problems(acquisition)
        kinds = []
        for p in probs:
            for r in self.cells[(p, acquisition)]:
                if r.kind not in kinds:
                    kinds.append(r.kind)
        width = 21
        head = f"{'Mean function':<14}" + "".join(f"{p:^{width}}" for p in probs)
        sub = f"{'':<14}" + "".join(f"{'Median':>10} {'MAD':>9} " for _ in probs)
        lines = [f"{self.value_name} ({acquisition}), alpha={self.alpha:g}; * best, + equivalent", head, sub]
        for k in kinds:
            line = f"{k:<14}"
            for p in probs:
                row = next((r for r in self.cells[(p, acquisition)] if r.kind == k), None)
                if row is None:
                    line += f"{'-':>10} {'-':>9} "
                else:
                    mark = "*" if row.best else "+" if row.equivalent else " "
                    line += f"{row.median:>9.2e}{mark} {row.mad:>9.2e} "
            lines.append(line.rstrip())
        return "\n".join(lines) + "\n"


def _kind_order(k):
    return (MEAN_KINDS.index(k) if k in MEAN_KINDS else len(MEAN_KINDS), k)


def compare_cell(values: dict, alpha: float = 0.05) -> list:
    """Flag the lowest-median kind and those not significantly worse than it.

    ``values`` maps kind -> {repeat: value}; every kind must cover the same
    repeats. Median ties go to the lexicographically first kind name.
    """
    kinds = sorted(values, key=_kind_order)
    repeats = sorted(values[kinds[0]])
    for k in kinds:
        if sorted(values[k]) != repeats:
            raise PairingError(f"kind {k!r} is not paired with {kinds[0]!r} by repeat")
    rows = []
    for k in kinds:
        med, mad = median_mad([values[k][r] for r in repeats])
        rows.append(CellRow(k, med, mad, len(repeats)))
    best = min(rows, key=lambda r: (r.median, r.kind))
    best.best = best.equivalent = True
    others = [r for r in rows if r is not best]
    if others:
        a = [values[best.kind][r] for r in repeats]
        pvals = [wilcoxon_one_sided(a, [values[o.kind][r] for r in repeats]).p for o in others]
        reject = holm_bonferroni(pvals, alpha)
        for o, p, rej in zip(others, pvals, reject):
            o.p_value = p
            o.equivalent = not rej
    return rows


def terminal_values(records) -> dict:
    """(problem, acquisition) -> kind -> repeat -> terminal regret, complete runs only."""
    out = defaultdict(lambda: defaultdict(dict))
    for rec in records:
        if not rec.complete:
            continue
        c = rec.config
        if c.repeat in out[(c.problem, c.acquisition)][c.mean_kind]:
            raise PairingError(f"duplicate repeat {c.repeat} for {c.problem}/{c.acquisition}/{c.mean_kind}")
        out[(c.problem, c.acquisition)][c.mean_kind][c.repeat] = rec.terminal_regret
    return out


def build_table(records, alpha: float = 0.05) -> ComparisonTable:
    table = ComparisonTable(alpha=alpha)
    grouped = terminal_values(records)
    for key in sorted(grouped):
        table.cells[key] = compare_cell(grouped[key], alpha)
    return table


def convergence_traces(records) -> list:
    """Rows of (problem, acquisition, mean, iteration, median, q25, q75) of regret."""
    groups = defaultdict(list)
    for rec in records:
        if rec.complete:
            c = rec.config
            groups[(c.problem, c.acquisition, c.mean_kind)].append(rec.regrets)
    rows = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], _kind_order(k[2]))):
        R = np.vstack(groups[key])
        q25, med, q75 = np.percentile(R, [25, 50, 75], axis=0)
        for i in range(R.shape[1]):
            rows.append((*key, i + 1, float(med[i]), float(q25[i]), float(q75[i])))
    return rows


def convergence_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["problem", "acquisition", "mean", "iteration", "median", "q25", "q75"])
    for row in convergence_traces(records):
        w.writerow([*row[:4], *(repr(v) for v in row[4:])])
    return buf.getvalue()


def nrmse(f_true, f_pred) -> float:
    """Root mean squared error divided by the range of the true values."""
    f_true = np.asarray(f_true, dtype=float).reshape(-1)
    f_pred = np.asarray(f_pred, dtype=float).reshape(-1)
    if f_true.shape != f_pred.shape:
        raise InvalidArgumentError("nrmse needs vectors of equal length")
    span = float(np.max(f_true) - np.min(f_true))
    if not span > 0:
        raise UndefinedRangeError("true values have zero range")
    return float(np.sqrt(np.mean((f_true - f_pred) ** 2)) / span)


@dataclass
class NRMSEStudy:
    rows: list = field(default_factory=list)  # dicts: problem, acquisition, mean, repeat, nrmse

    def values(self, problem: str, kind: str, acquisition: str | None = None) -> list:
        return [r["nrmse"] for r in self.rows
                if r["problem"] == problem and r["mean"] == kind
                and (acquisition is None or r["acquisition"] == acquisition)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["problem", "acquisition", "mean", "repeat", "nrmse"])
        for r in self.rows:
            w.writerow([r["problem"], r["acquisition"], r["mean"], r["repeat"], repr(r["nrmse"])])
        return buf.getvalue()

    def table(self, alpha: float = 0.05) -> ComparisonTable:
        grouped = defaultdict(lambda: defaultdict(dict))
        for r in self.rows:
            grouped[(r["problem"], r["acquisition"])][r["mean"]][r["repeat"]] = r["nrmse"]
        table = ComparisonTable(alpha=alpha, value_name="NRMSE")
        for key in sorted(grouped):
            table.cells[key] = compare_cell(grouped[key], alpha)
        return table


def nrmse_test_points(problem: str, repeat: int, seed: int, n_test: int = 1000, n_candidates: int = 10) -> np.ndarray:
    """LHS test locations shared by every model trained on the same (problem, repeat)."""
    d = get_problem(problem).d
    return latin_hypercube(n_test, d, derive_seed(seed, "nrmse:" + problem, repeat), n_candidates).points


def fit_surrogate(X, f, kind: str, seed: int, restarts: int = 10):
    """Mean + GP on standardised targets; returns a raw-scale mean predictor."""
    f_std, st = standardise(f)
    data = Dataset(X, f_std)
    spec = MeanFunctionSpec(kind, cv=CVGrid(seed=derive_seed(seed, "cv")),
                            forest=ForestParams(seed=derive_seed(seed, "forest")))
    mean = fit_mean(spec, data)
    theta = fit_hyperparameters(data, mean, restarts, derive_seed(seed, "gp"))
    gp = build_posterior(data, mean, theta)
    return lambda Xq: st.invert(gp.predict_batch(Xq)[0])


def run_nrmse_study(records, seed: int = 0, n_train: int = 100, n_test: int = 1000,
                    restarts: int = 10, lhs_candidates: int = 10) -> NRMSEStudy:
    """Refit each run's model on its first ``n_train`` evaluations and score it
    on paired LHS test points."""
    study = NRMSEStudy()
    cache = {}
    for rec in records:
        c = rec.config
        if len(rec.iterations) < n_train:
            raise InvalidArgumentError(f"record {c.problem}/{c.mean_kind}/{c.repeat} has < {n_train} iterations")
        key = (c.problem, c.repeat)
        if key not in cache:
            Xt = nrmse_test_points(c.problem, c.repeat, seed, n_test, lhs_candidates)
            cache[key] = (Xt, evaluate_batch(get_problem(c.problem), Xt))
        Xt, ft = cache[key]
        its = rec.iterations[:n_train]
        X = np.array([it.x for it in its])
        f = np.array([it.f for it in its])
        model = fit_surrogate(X, f, c.mean_kind, derive_seed(seed, "nrmse-fit", c.seed), restarts)
        study.rows.append({"problem": c.problem, "acquisition": c.acquisition, "mean": c.mean_kind,
                           "repeat": c.repeat, "nrmse": nrmse(ft, model(Xt))})
    return study
