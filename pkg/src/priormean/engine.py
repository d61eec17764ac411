"""Sequential Bayesian optimisation loop and experiment grids.

Every iteration standardises the observations, fits the prior mean on the
standardised values, fits the kernel hyperparameters, maximises the
acquisition and evaluates the chosen point. All randomness comes from named
substreams of the run seed, so a run is reproducible bit for bit.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from .acquisition import AcquisitionSpec, MultistartParams, maximise_acquisition
from .benchmarks import evaluate, get_problem, simple_regret
from .design import latin_hypercube
from .extratrees import ForestParams
from .gp import Dataset, build_posterior, fit_hyperparameters
from .means import CVGrid, MeanFunctionSpec, fit_mean
from .seeding import derive_seed, substream

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STD_FLOOR = 1e-12
DUPLICATE_TOL = 1e-8
DUPLICATE_RADIUS = 1e-6


@dataclass(frozen=True)
class Standardisation:
    mu_hat: float
    s_hat: float

    def apply(self, f):
        return (np.asarray(f, dtype=float) - self.mu_hat) / self.s_hat

    def invert(self, f_std):
        return np.asarray(f_std, dtype=float) * self.s_hat + self.mu_hat


def standardise(f):
    """Centre and scale with the population standard deviation.

    A spread below 1e-12 only centres (``s_hat = 1``).
    """
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size == 0:
        raise ValueError("cannot standardise an empty vector")
    mu = float(np.mean(f))
    s = float(np.std(f))
    st = Standardisation(mu, s if s >= STD_FLOOR else 1.0)
    return st.apply(f), st


def unstandardise(f_std, st: Standardisation):
    return st.invert(f_std)


@dataclass(frozen=True)
class RunConfig:
    problem: str
    mean_kind: str
    acquisition: str = "EI"
    M: int | None = None  # None: 2 * d
    T: int = 200
    seed: int = 0
    gp_restarts: int = 10
    repeat: int = 0
    ucb_delta: float = 0.1
    n_raw: int | None = None
    n_local: int = 10
    lhs_candidates: int = 1000
    n_trees: int = 100

    def resolved(self) -> "RunConfig":
        d = get_problem(self.problem).d
        cfg = self if self.M is not None else replace(self, M=2 * d)
        if cfg.M < 2:
            raise ValueError("M must be >= 2")
        if cfg.T < cfg.M:
            raise ValueError("budget T must be >= M")
        MeanFunctionSpec(cfg.mean_kind)
        AcquisitionSpec(cfg.acquisition, cfg.ucb_delta)
        return cfg


@dataclass
class IterationRecord:
    index: int
    x: list
    f: float
    best_so_far: float
    regret: float
    theta0: float | None = None
    theta1: float | None = None
    nugget: float | None = None
    lam: float | None = None
    gamma: float | None = None
    mean: dict | None = None
    f_best_std: float | None = None
    acq_value: float | None = None


@dataclass
class RunRecord:
    config: RunConfig
    f_star: float
    iterations: list = field(default_factory=list)
    complete: bool = True
    error: str | None = None
    wall_times: list = field(default_factory=list)  # kept out of the record file

    @property
    def regrets(self) -> np.ndarray:
        return np.array([it.regret for it in self.iterations])

    @property
    def terminal_regret(self) -> float:
        return self.iterations[-1].regret

    @property
    def terminal_best(self) -> float:
        return self.iterations[-1].best_so_far

    def header(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "config": asdict(self.config), "f_star": self.f_star,
                "complete": self.complete, "error": self.error, "std_convention": "population"}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [json.dumps(asdict(it), sort_keys=True) for it in self.iterations]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RunRecord":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        head = rows[0]
        if head.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema {head.get('schema_version')!r}")
        rec = cls(RunConfig(**head["config"]), head["f_star"], complete=head["complete"], error=head["error"])
        rec.iterations = [IterationRecord(**r) for r in rows[1:]]
        return rec


def _mean_spec(cfg: RunConfig, n: int) -> MeanFunctionSpec:
    return MeanFunctionSpec(
        cfg.mean_kind,
        cv=CVGrid(seed=derive_seed(cfg.seed, "cv", n)),
        forest=ForestParams(n_trees=cfg.n_trees, seed=derive_seed(cfg.seed, "forest", n)),
    )


def _dedupe(x: np.ndarray, X: np.ndarray, seed: int, n: int) -> np.ndarray:
    if np.min(np.linalg.norm(X - x, axis=1)) > DUPLICATE_TOL:
        return x
    rng = substream(seed, "duplicate", n)
    step = rng.normal(size=x.shape)
    step *= DUPLICATE_RADIUS * rng.random() ** (1.0 / x.size) / np.linalg.norm(step)
    return np.clip(x + step, 0.0, 1.0)


def _record(records: list, x, y, f_star, **extra):
    best = y if not records else min(records[-1].best_so_far, y)
    records.append(IterationRecord(len(records) + 1, [float(v) for v in x], float(y), float(best),
                                   simple_regret(f_star, best), **extra))


def run_bo(config: RunConfig) -> RunRecord:
    """Run one optimisation. Component errors end the run with ``complete=False``."""
    cfg = config.resolved()
    problem = get_problem(cfg.problem)
    rec = RunRecord(cfg, problem.f_star)
    acq = AcquisitionSpec(cfg.acquisition, cfg.ucb_delta, MultistartParams(cfg.n_raw, cfg.n_local))
    with threadpool_limits(limits=1):
        try:
            X = latin_hypercube(cfg.M, problem.d, cfg.seed, cfg.lhs_candidates).points
            f = []
            for x in X:
                t0 = time.perf_counter()
                f.append(evaluate(problem, x))
                _record(rec.iterations, x, f[-1], problem.f_star)
                rec.wall_times.append(time.perf_counter() - t0)
            X = [x for x in X]
            theta = None
            for n in range(cfg.M, cfg.T):
                t0 = time.perf_counter()
                f_std, _ = standardise(f)
                data = Dataset(np.array(X), f_std)
                mean = fit_mean(_mean_spec(cfg, n), data)
                theta = fit_hyperparameters(data, mean, cfg.gp_restarts, derive_seed(cfg.seed, "gp", n), theta)
                gp = build_posterior(data, mean, theta)
                f_best = float(np.min(f_std))
                x, a = maximise_acquisition(gp, acq, f_best, n, derive_seed(cfg.seed, "acq", n), return_value=True)
                x = _dedupe(x, data.X, cfg.seed, n)
                y = evaluate(problem, x)
                X.append(x)
                f.append(y)
                _record(rec.iterations, x, y, problem.f_star, theta0=theta.theta0, theta1=theta.theta1,
                        nugget=gp.nugget, lam=mean.lam, gamma=mean.gamma, mean=mean.to_dict(),
                        f_best_std=f_best, acq_value=float(a))
                rec.wall_times.append(time.perf_counter() - t0)
        except Exception as exc:  # partial record, flagged
            log.exception("run %s failed", cfg)
            rec.complete = False
            rec.error = f"{type(exc).__name__}: {exc}"
    return rec


def run_seed(base_seed: int, problem: str, repeat: int) -> int:
    """Seed shared by every mean kind and acquisition for one (problem, repeat)."""
    return derive_seed(base_seed, "run:" + problem, repeat)


def grid_configs(problems, mean_kinds, acquisitions, n_repeats: int, base_seed: int, **overrides) -> list:
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    return [
        RunConfig(problem=p, mean_kind=m, acquisition=a, seed=run_seed(base_seed, p, r), repeat=r, **overrides)
        for p in problems
        for a in acquisitions
        for m in mean_kinds
        for r in range(n_repeats)
    ]


def run_grid(problems, mean_kinds, acquisitions, n_repeats: int, base_seed: int = 0, jobs: int = 1,
             **overrides) -> list:
    """Every (problem, acquisition, mean, repeat) run, in grid order.

    Repeat ``r`` of each mean kind starts from the same initial design.
    """
    configs = grid_configs(problems, mean_kinds, acquisitions, n_repeats, base_seed, **overrides)
    if jobs <= 1:
        return [run_bo(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_bo, configs))
