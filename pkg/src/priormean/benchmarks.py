"""Synthetic test problems on the unit cube.

Formulae and native bounds follow the Virtual Library of Simulation
Experiments (sfu.ca/~ssurjano). Minimum values are stored to full double
precision, refined from the published minimisers, because regret checks
reject observations more than 1e-9 below ``f_star``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataCorruptionError, InvalidArgumentError


@dataclass(frozen=True)
class BenchmarkProblem:
    name: str
    d: int
    lower: np.ndarray
    upper: np.ndarray
    objective: Callable[[np.ndarray], np.ndarray]  # rows of native points -> values
    f_star: float
    x_star: tuple = ()  # known minimisers, native coordinates
    meta: tuple = ()

    def to_native(self, x_unit) -> np.ndarray:
        return self.lower + np.asarray(x_unit, dtype=float) * (self.upper - self.lower)

    def to_unit(self, x_native) -> np.ndarray:
        return (np.asarray(x_native, dtype=float) - self.lower) / (self.upper - self.lower)

    def native(self, x) -> float:
        return float(self.objective(np.atleast_2d(np.asarray(x, dtype=float)))[0])


def _check_unit(problem: BenchmarkProblem, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != problem.d:
        raise InvalidArgumentError(f"{problem.name} takes {problem.d} coordinates, got {X.shape[1]}")
    if not np.all(np.isfinite(X)) or np.any(X < 0.0) or np.any(X > 1.0):
        raise InvalidArgumentError(f"{problem.name}: input outside [0, 1]^{problem.d}")
    return X


def evaluate(problem: BenchmarkProblem, x_unit) -> float:
    """Objective value at a unit-cube point."""
    x = np.asarray(x_unit, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError("evaluate takes a single point; use evaluate_batch")
    X = _check_unit(problem, x[None, :])
    return float(problem.objective(problem.to_native(X))[0])


def evaluate_batch(problem: BenchmarkProblem, X_unit) -> np.ndarray:
    X = _check_unit(problem, X_unit)
    return np.asarray(problem.objective(problem.to_native(X)), dtype=float)


def branin(X):
    b, c, t = 5.1 / (4.0 * np.pi**2), 5.0 / np.pi, 1.0 / (8.0 * np.pi)
    x1, x2 = X[:, 0], X[:, 1]
    return (x2 - b * x1**2 + c * x1 - 6.0) ** 2 + 10.0 * (1.0 - t) * np.cos(x1) + 10.0


def eggholder(X):
    x1, x2 = X[:, 0], X[:, 1]
    return -(x2 + 47.0) * np.sin(np.sqrt(np.abs(x2 + x1 / 2.0 + 47.0))) - x1 * np.sin(
        np.sqrt(np.abs(x1 - (x2 + 47.0)))
    )


def goldstein_price(X):
    x1, x2 = X[:, 0], X[:, 1]
    a = 1.0 + (x1 + x2 + 1.0) ** 2 * (19.0 - 14.0 * x1 + 3.0 * x1**2 - 14.0 * x2 + 6.0 * x1 * x2 + 3.0 * x2**2)
    b = 30.0 + (2.0 * x1 - 3.0 * x2) ** 2 * (
        18.0 - 32.0 * x1 + 12.0 * x1**2 + 48.0 * x2 - 36.0 * x1 * x2 + 27.0 * x2**2
    )
    return a * b


def six_hump_camel(X):
    x1, x2 = X[:, 0], X[:, 1]
    return (4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2 + x1 * x2 + (-4.0 + 4.0 * x2**2) * x2**2


_SHEKEL_C = np.array(
    [
        [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
        [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
        [4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0],
        [4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6],
    ]
)
_SHEKEL_BETA = np.array([1, 2, 2, 4, 4, 6, 3, 7, 5, 5]) / 10.0


def shekel(X):
    sq = np.sum((X[:, :, None] - _SHEKEL_C[None, :, :]) ** 2, axis=1)
    return -np.sum(1.0 / (sq + _SHEKEL_BETA[None, :]), axis=1)


def ackley(X):
    a, b, c = 20.0, 0.2, 2.0 * np.pi
    t1 = -a * np.exp(-b * np.sqrt(np.mean(X**2, axis=1)))
    t2 = -np.exp(np.mean(np.cos(c * X), axis=1))
    return t1 + t2 + a + np.e


_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_H6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def hartmann6(X):
    inner = np.sum(_H6_A[None, :, :] * (X[:, None, :] - _H6_P[None, :, :]) ** 2, axis=2)
    return -np.sum(_H6_ALPHA[None, :] * np.exp(-inner), axis=1)


MICHALEWICZ_STEEPNESS = 10


def michalewicz(X):
    i = np.arange(1, X.shape[1] + 1)
    return -np.sum(np.sin(X) * np.sin(i * X**2 / np.pi) ** (2 * MICHALEWICZ_STEEPNESS), axis=1)


def rosenbrock(X):
    return np.sum(100.0 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (X[:, :-1] - 1.0) ** 2, axis=1)


def styblinski_tang(X):
    return 0.5 * np.sum(X**4 - 16.0 * X**2 + 5.0 * X, axis=1)


def _box(lo, hi, d):
    return np.broadcast_to(np.asarray(lo, float), (d,)).copy(), np.broadcast_to(np.asarray(hi, float), (d,)).copy()


def _problem(name, d, lo, hi, fn, f_star, x_star, meta=()):
    lower, upper = _box(lo, hi, d)
    return BenchmarkProblem(name, d, lower, upper, fn, float(f_star),
                            tuple(np.asarray(x, dtype=float) for x in x_star), meta)


_MICH10_X = (2.202905513712895, 1.570796321690346, 1.284991569744435, 1.923058469318518,
             1.720469772197735, 1.570796325989947, 1.454413971220296, 1.756086521122165,
             1.655717416863396, 1.570796325957596)
_SHEKEL_X = (4.000746860776146, 3.999509472230562, 4.000746860776146, 3.999509472230562)
_H6_X = (0.201689511110516, 0.150010688891253, 0.476873973426615,
         0.275332430121014, 0.311651617871759, 0.657300532687007)
_ST_X = -2.903534043266028

PROBLEMS = {
    p.name: p
    for p in [
        _problem("Branin", 2, [-5.0, 0.0], [10.0, 15.0], branin, 0.39788735772973816,
                 [(-np.pi, 12.275), (np.pi, 2.275), (3 * np.pi, 2.475)]),
        _problem("Eggholder", 2, -512.0, 512.0, eggholder, -959.6406627208507,
                 [(512.0, 404.2318049938646)]),
        _problem("GoldsteinPrice", 2, -2.0, 2.0, goldstein_price, 3.0, [(0.0, -1.0)]),
        _problem("SixHumpCamel", 2, [-3.0, -2.0], [3.0, 2.0], six_hump_camel, -1.0316284534898774,
                 [(0.089842011649777, -0.71265640411064), (-0.08984201498133, 0.71265640271488)]),
        _problem("Shekel", 4, 0.0, 10.0, shekel, -10.536443153483505, [_SHEKEL_X], (("wells", 10),)),
        _problem("Ackley", 5, -32.768, 32.768, ackley, 0.0, [np.zeros(5)]),
        _problem("Hartmann6", 6, 0.0, 1.0, hartmann6, -3.322368011415515, [_H6_X]),
        _problem("Michalewicz", 10, 0.0, np.pi, michalewicz, -9.660151715641348, [_MICH10_X],
                 (("steepness", MICHALEWICZ_STEEPNESS),)),
        _problem("Rosenbrock", 10, -5.0, 10.0, rosenbrock, 0.0, [np.ones(10)]),
        _problem("StyblinskiTang", 10, -5.0, 5.0, styblinski_tang, -391.6616570377142,
                 [np.full(10, _ST_X)]),
    ]
}

SYNTHETIC_NAMES = tuple(PROBLEMS)


def _toy_quadratic(X):
    return np.sum((X - 0.3) ** 2, axis=1)


def _toy_linear(X):
    return X[:, 0]


def _toy_smooth(X):
    x = X[:, 0]
    return np.sin(6.0 * x) + 0.5 * x


# Low-dimensional problems for tests and smoke runs; not part of the benchmark suite.
TOY_PROBLEMS = {
    p.name: p
    for p in [
        _problem("ToyQuadratic1D", 1, 0.0, 1.0, _toy_quadratic, 0.0, [(0.3,)]),
        _problem("ToyLinear1D", 1, 0.0, 1.0, _toy_linear, 0.0, [(0.0,)]),
        _problem("ToySmooth1D", 1, 0.0, 1.0, _toy_smooth, -0.6107751541106103, [(0.7714931489623457,)]),
    ]
}


def get_problem(name: str) -> BenchmarkProblem:
    try:
        return PROBLEMS[name] if name in PROBLEMS else TOY_PROBLEMS[name]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown problem {name!r}; known: {', '.join(list(PROBLEMS) + list(TOY_PROBLEMS))}"
        ) from None


def simple_regret(f_star: float, best_so_far: float) -> float:
    if best_so_far < f_star - 1e-9:
        raise DataCorruptionError(f"observed {best_so_far!r} below the known minimum {f_star!r}")
    return abs(f_star - best_so_far)
