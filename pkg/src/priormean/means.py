"""Prior mean functions for the GP surrogate.

Eight kinds are supported: four constants (Arithmetic, Median, Min, Max),
ridge-regressed Linear and Quadratic polynomials, an RBF network with one
centre per training location, and an Extra-Trees ensemble. Fitted means are
callables mapping an ``(n, d)`` array to ``n`` values and expose a gradient
for acquisition optimisation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import InvalidArgumentError, SingularSystemError
from .extratrees import ForestParams, ForestState, extra_trees_fit, extra_trees_predict
from .gp import Dataset
from .seeding import substream

CONSTANT_KINDS = ("Arithmetic", "Median", "Min", "Max")
BASIS_KINDS = ("Linear", "Quadratic")
MEAN_KINDS = CONSTANT_KINDS + BASIS_KINDS + ("RandomForest", "RBF")

LAMBDAS = tuple(10.0**k for k in range(-6, 3))
GAMMAS = tuple(10.0 ** (k / 2) for k in range(-6, 5))


@dataclass(frozen=True)
class CVGrid:
    lambdas: tuple = LAMBDAS
    gammas: tuple = GAMMAS
    folds: int = 5
    seed: int = 0


@dataclass(frozen=True)
class MeanFunctionSpec:
    kind: str
    cv: CVGrid = field(default_factory=CVGrid)
    forest: ForestParams = field(default_factory=ForestParams)
    # RBF basis uses exp(-gamma * ||x - z||) unless this is set
    rbf_squared: bool = False

    def __post_init__(self):
        if self.kind not in MEAN_KINDS:
            raise InvalidArgumentError(f"unknown mean kind {self.kind!r}; expected one of {MEAN_KINDS}")


class FittedMean:
    kind: str
    lam: float | None = None
    gamma: float | None = None

    def __call__(self, X) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.zeros_like(X, dtype=float)

    def to_dict(self) -> dict:
        raise NotImplementedError


class ConstantMean(FittedMean):
    def __init__(self, kind: str, c: float):
        self.kind = kind
        self.c = float(c)

    def __call__(self, X):
        return np.full(np.atleast_2d(X).shape[0], self.c)

    def to_dict(self):
        return {"kind": self.kind, "c": self.c}


class PolynomialMean(FittedMean):
    def __init__(self, kind: str, w: np.ndarray, lam: float):
        self.kind = kind
        self.w = np.asarray(w, dtype=float)
        self.lam = float(lam)

    def __call__(self, X):
        return design_matrix(self.kind, X) @ self.w

    def gradient(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        d = X.shape[1]
        g = np.tile(self.w[1 : d + 1], (X.shape[0], 1))
        if self.kind == "Quadratic":
            for w, (i, j) in zip(self.w[d + 1 :], _quadratic_pairs(d)):
                if i == j:
                    g[:, i] += 2.0 * w * X[:, i]
                else:
                    g[:, i] += w * X[:, j]
                    g[:, j] += w * X[:, i]
        return g

    def to_dict(self):
        return {"kind": self.kind, "w": self.w.tolist(), "lambda": self.lam}


class RBFMean(FittedMean):
    kind = "RBF"

    def __init__(self, w, centres, gamma: float, lam: float, squared: bool = False):
        self.w = np.asarray(w, dtype=float)
        self.centres = np.atleast_2d(np.asarray(centres, dtype=float))
        self.gamma = float(gamma)
        self.lam = float(lam)
        self.squared = squared

    def __call__(self, X):
        return rbf_features(X, self.centres, self.gamma, self.squared) @ self.w

    def gradient(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        diff = X[:, None, :] - self.centres[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=2))
        if self.squared:
            coef = -2.0 * self.gamma * np.exp(-self.gamma * dist**2)
        else:
            # non-differentiable at a centre; use the zero subgradient there
            safe = np.where(dist > 0, dist, 1.0)
            coef = np.where(dist > 0, -self.gamma * np.exp(-self.gamma * dist) / safe, 0.0)
        return np.einsum("nc,ncd,c->nd", coef, diff, self.w)

    def to_dict(self):
        return {"kind": "RBF", "w": self.w.tolist(), "lambda": self.lam, "gamma": self.gamma,
                "squared": self.squared}


class ForestMean(FittedMean):
    kind = "RandomForest"

    def __init__(self, state: ForestState, seed: int):
        self.state = state
        self.seed = int(seed)

    def __call__(self, X):
        return extra_trees_predict(self.state, X)

    def to_dict(self):
        p = self.state.params
        return {"kind": "RandomForest", "seed": self.seed, "n_trees": p.n_trees,
                "k_candidate_cuts": p.k_candidate_cuts, "min_samples_leaf": p.min_samples_leaf,
                "bootstrap": p.bootstrap}


def fit_constant(kind: str, f) -> ConstantMean:
    f = np.asarray(f, dtype=float).reshape(-1)
    if f.size == 0:
        raise InvalidArgumentError("cannot fit a constant to no observations")
    if not np.all(np.isfinite(f)):
        raise InvalidArgumentError("non-finite observations")
    reducers = {"Arithmetic": np.mean, "Median": np.median, "Min": np.min, "Max": np.max}
    if kind not in reducers:
        raise InvalidArgumentError(f"{kind!r} is not a constant mean kind")
    return ConstantMean(kind, float(reducers[kind](f)))


def _quadratic_pairs(d: int):
    return list(combinations_with_replacement(range(d), 2))


def design_matrix(kind: str, X) -> np.ndarray:
    """Polynomial basis: constant, linear terms, then (for Quadratic) every
    product ``x_i x_j`` with ``i <= j`` in lexicographic order."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cols = [np.ones((X.shape[0], 1)), X]
    if kind == "Quadratic":
        pairs = _quadratic_pairs(X.shape[1])
        cols.append(np.column_stack([X[:, i] * X[:, j] for i, j in pairs]))
    elif kind != "Linear":
        raise InvalidArgumentError(f"no polynomial design for kind {kind!r}")
    return np.hstack(cols)


def rbf_features(X, centres, gamma: float, squared: bool = False) -> np.ndarray:
    """``exp(-gamma * ||x - z_i||)`` for each centre ``z_i`` (squared distance if asked)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(centres, dtype=float))
    if Z.shape[0] == 0:
        raise InvalidArgumentError("rbf_features needs at least one centre")
    sq = np.maximum((X * X).sum(1)[:, None] + (Z * Z).sum(1)[None, :] - 2.0 * X @ Z.T, 0.0)
    if squared:
        return np.exp(-gamma * sq)
    return np.exp(-gamma * np.sqrt(sq))


def _svd_ridge(U, s, Vt, f, lam):
    Utf = U.T @ f
    return Vt.T @ (s / (s * s + lam) * Utf)


def ridge_fit(H, f, lam: float) -> np.ndarray:
    """Minimiser of ``||f - H w||^2 + lam ||w||^2`` via a thin SVD of ``H``."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    f = np.asarray(f, dtype=float).reshape(-1)
    if H.shape[0] != f.shape[0]:
        raise InvalidArgumentError("H and f differ in row count")
    if lam < 0:
        raise InvalidArgumentError("lambda must be >= 0")
    U, s, Vt = np.linalg.svd(H, full_matrices=False)
    if lam == 0:
        tol = max(H.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        if H.shape[0] < H.shape[1] or s.size == 0 or s[-1] <= tol:
            raise SingularSystemError("H^T H is singular and lambda = 0")
    return _svd_ridge(U, s, Vt, f, lam)


def cv_folds(t: int, folds: int, seed: int) -> list:
    """Held-out index sets: seeded shuffle into near-equal folds, leave-one-out below ``folds`` points."""
    perm = substream(seed, "cv-folds", t).permutation(t)
    k = folds if t >= folds else t
    return [np.sort(p) for p in np.array_split(perm, k)]


def _features(kind, Xtr, Xte, gamma, squared):
    if kind == "RBF":
        return rbf_features(Xtr, Xtr, gamma, squared), rbf_features(Xte, Xtr, gamma, squared)
    return design_matrix(kind, Xtr), design_matrix(kind, Xte)


def cross_validate(spec: MeanFunctionSpec, data: Dataset):
    """Pick ``(lambda, gamma)`` by minimum pooled held-out squared error.

    ``gamma`` is ``None`` for the polynomial kinds. Ties go to the larger
    lambda, then the smaller gamma.
    """
    grid = spec.cv
    lambdas = sorted(grid.lambdas, reverse=True)
    gammas = sorted(grid.gammas) if spec.kind == "RBF" else [None]
    if data.t < 2:
        return max(grid.lambdas), gammas[0]
    folds = cv_folds(data.t, grid.folds, grid.seed)
    errors = np.zeros((len(gammas), len(lambdas)))
    all_idx = np.arange(data.t)
    for gi, gamma in enumerate(gammas):
        for held in folds:
            train = np.setdiff1d(all_idx, held)
            Htr, Hte = _features(spec.kind, data.X[train], data.X[held], gamma, spec.rbf_squared)
            U, s, Vt = np.linalg.svd(Htr, full_matrices=False)
            Utf = U.T @ data.f[train]
            for li, lam in enumerate(lambdas):
                w = Vt.T @ (s / (s * s + lam) * Utf)
                errors[gi, li] += np.sum((Hte @ w - data.f[held]) ** 2)
    errors /= data.t
    best, best_err = (0, 0), errors[0, 0]
    # scan in preference order: larger lambda first, then smaller gamma
    for li in range(len(lambdas)):
        for gi in range(len(gammas)):
            e = errors[gi, li]
            if e < best_err * (1.0 - 1e-12):
                best, best_err = (gi, li), e
    return lambdas[best[1]], gammas[best[0]]


def fit_mean(spec: MeanFunctionSpec, data: Dataset) -> FittedMean:
    if spec.kind in CONSTANT_KINDS:
        return fit_constant(spec.kind, data.f)
    if spec.kind == "RandomForest":
        state = extra_trees_fit(spec.forest, data.X, data.f)
        return ForestMean(state, spec.forest.seed)
    lam, gamma = cross_validate(spec, data)
    if spec.kind == "RBF":
        lam = max(lam, min(LAMBDAS))
        w = ridge_fit(rbf_features(data.X, data.X, gamma, spec.rbf_squared), data.f, lam)
        return RBFMean(w, data.X.copy(), gamma, lam, spec.rbf_squared)
    w = ridge_fit(design_matrix(spec.kind, data.X), data.f, lam)
    return PolynomialMean(spec.kind, w, lam)


def evaluate_mean(mean: FittedMean, x) -> float:
    return float(mean(np.atleast_2d(np.asarray(x, dtype=float)))[0])
