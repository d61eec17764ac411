"""Gaussian process posterior with an isotropic Matern 5/2 kernel.

The prior mean is any fitted mean function (see :mod:`priormean.means`); the
GP models the residual ``f - m(X)``. Hyperparameters are fitted by maximising
the log marginal likelihood with multi-restart L-BFGS-B in log space.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .errors import InvalidArgumentError, SingularKernelError
from .seeding import substream

SQRT5 = np.sqrt(5.0)

# nugget is relative to theta0: 1e-6, 1e-5, ..., 1e-2
JITTER_START = 1e-6
JITTER_MAX = 1e-2

THETA0_BOUNDS = (1e-4, 1e3)
THETA1_UPPER = 1e2


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if X.shape[0] != f.shape[0]:
            raise InvalidArgumentError(f"X has {X.shape[0]} rows but f has {f.shape[0]} values")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise InvalidArgumentError("dataset needs t >= 1 and d >= 1")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(f))):
            raise InvalidArgumentError("dataset contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "f", f)

    @property
    def t(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class KernelHyperparams:
    theta0: float
    theta1: float
    # set when every restart failed and mid-box values were returned
    fallback: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.theta0) and np.isfinite(self.theta1)):
            raise InvalidArgumentError("hyperparameters must be finite")
        if self.theta0 <= 0 or self.theta1 < 0:
            raise InvalidArgumentError("need theta0 > 0 and theta1 >= 0")

    def as_log(self) -> np.ndarray:
        return np.log([self.theta0, self.theta1])


@dataclass(frozen=True)
class Prediction:
    mu: float
    sigma2: float


def _points(x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("non-finite input point")
    return x


def _distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.sqrt(np.maximum(sq, 0.0))


def _matern_from_r(r: np.ndarray, theta0: float) -> np.ndarray:
    return theta0 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * np.exp(-SQRT5 * r)


def matern52(x, xp, hyper: KernelHyperparams) -> float:
    """Kernel value between two points."""
    x = _points(x).reshape(-1)
    xp = _points(xp).reshape(-1)
    if x.shape != xp.shape:
        raise InvalidArgumentError("points differ in dimension")
    r = hyper.theta1 * np.sqrt(np.sum((x - xp) ** 2))
    return float(_matern_from_r(r, hyper.theta0))


def matern52_matrix(A, B, hyper: KernelHyperparams) -> np.ndarray:
    """Cross-covariance matrix between the rows of ``A`` and ``B``."""
    r = hyper.theta1 * _distances(_points(A), _points(B))
    return _matern_from_r(r, hyper.theta0)


def _jitter_ladder(theta0: float, nugget: float | None):
    """Nugget values to try, smallest first."""
    rel = JITTER_START
    ladder = []
    if nugget is not None:
        if nugget < 0:
            raise InvalidArgumentError("nugget must be >= 0")
        ladder.append(float(nugget))
    while rel <= JITTER_MAX * (1 + 1e-9):
        eps = rel * theta0
        if not ladder or eps > ladder[-1]:
            ladder.append(eps)
        rel *= 10.0
    return ladder


def _factor(K: np.ndarray, theta0: float, nugget: float | None):
    t = K.shape[0]
    for eps in _jitter_ladder(theta0, nugget):
        try:
            L = cholesky(K + eps * np.eye(t), lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)) and np.all(np.diag(L) > 0):
            return L, eps
    raise SingularKernelError(f"Cholesky failed up to nugget {JITTER_MAX:g}*theta0")


class GPPosterior:
    """Fitted GP. Immutable after construction; use :func:`build_posterior`."""

    def __init__(self, data: Dataset, mean, hyper: KernelHyperparams, chol, alpha, nugget):
        self.data = data
        self.mean = mean
        self.hyper = hyper
        self.chol = chol
        self.alpha = alpha
        self.nugget = nugget

    def predict(self, x) -> Prediction:
        mu, s2 = self.predict_batch(x)
        return Prediction(float(mu[0]), float(s2[0]))

    def predict_batch(self, Xq):
        """Posterior mean and clamped variance at each row of ``Xq``."""
        Xq = _points(Xq)
        Kq = matern52_matrix(Xq, self.data.X, self.hyper)
        mu = self.mean(Xq) + Kq @ self.alpha
        V = solve_triangular(self.chol, Kq.T, lower=True, check_finite=False)
        s2 = self.hyper.theta0 - np.sum(V * V, axis=0)
        return mu, np.maximum(s2, 0.0)

    def predict_with_gradient(self, x):
        """Mean, variance and their gradients with respect to ``x`` (one point)."""
        x = _points(x)
        X = self.data.X
        h = self.hyper
        diff = x - X
        dist = np.sqrt(np.sum(diff * diff, axis=1))
        r = h.theta1 * dist
        e = np.exp(-SQRT5 * r)
        k = h.theta0 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * e
        # dk/dx = -(5/3) theta0 theta1^2 (1 + sqrt5 r) exp(-sqrt5 r) (x - x_i)
        dk = (-(5.0 / 3.0) * h.theta0 * h.theta1**2 * (1.0 + SQRT5 * r) * e)[:, None] * diff
        mu = float(self.mean(x)[0] + k @ self.alpha)
        dmu = self.mean.gradient(x)[0] + dk.T @ self.alpha
        v = cho_solve((self.chol, True), k, check_finite=False)
        s2 = float(h.theta0 - k @ v)
        ds2 = -2.0 * dk.T @ v
        if s2 <= 0.0:
            return mu, 0.0, dmu, np.zeros_like(ds2)
        return mu, s2, dmu, ds2


def build_posterior(data: Dataset, mean, hyper: KernelHyperparams, nugget: float | None = None) -> GPPosterior:
    """Factorise ``K + eps I`` and cache the weights.

    ``nugget=None`` starts from ``1e-6 * theta0``; an explicit nugget is tried
    first. Either way the nugget escalates tenfold on Cholesky failure up to
    ``1e-2 * theta0``.
    """
    K = matern52_matrix(data.X, data.X, hyper)
    L, eps = _factor(K, hyper.theta0, nugget)
    resid = data.f - mean(data.X)
    alpha = cho_solve((L, True), resid, check_finite=False)
    return GPPosterior(data, mean, hyper, L, alpha, eps)


def predict(gp: GPPosterior, x) -> Prediction:
    return gp.predict(x)


def log_marginal_likelihood(data: Dataset, mean, hyper: KernelHyperparams, nugget: float | None = None) -> float:
    """Log marginal likelihood up to the additive constant."""
    gp = build_posterior(data, mean, hyper, nugget)
    resid = data.f - mean(data.X)
    return float(-np.sum(np.log(np.diag(gp.chol))) - 0.5 * resid @ gp.alpha)


def mll_and_gradient(log_theta, data: Dataset, resid: np.ndarray, dist: np.ndarray | None = None):
    """Log marginal likelihood and its gradient in ``(log theta0, log theta1)``.

    Uses the relative nugget ladder, so the nugget scales with theta0 and the
    theta0 derivative of ``K + eps I`` is the matrix itself.
    """
    theta0, theta1 = np.exp(log_theta)
    if dist is None:
        dist = _distances(data.X, data.X)
    t = resid.shape[0]
    r = theta1 * dist
    e = np.exp(-SQRT5 * r)
    K = theta0 * (1.0 + SQRT5 * r + (5.0 / 3.0) * r * r) * e
    L, eps = _factor(K, theta0, None)
    alpha = cho_solve((L, True), resid, check_finite=False)
    value = -np.sum(np.log(np.diag(L))) - 0.5 * resid @ alpha
    Kinv = cho_solve((L, True), np.eye(t), check_finite=False)
    g0 = 0.5 * resid @ alpha - 0.5 * t
    dK1 = -(5.0 / 3.0) * theta0 * r * r * (1.0 + SQRT5 * r) * e
    g1 = 0.5 * alpha @ dK1 @ alpha - 0.5 * np.sum(Kinv * dK1)
    return float(value), np.array([g0, g1])


def hyper_box(d: int) -> np.ndarray:
    """Search box for ``(theta0, theta1)``, one row per hyperparameter."""
    return np.array([THETA0_BOUNDS, (10.0**-1.5 / np.sqrt(d), THETA1_UPPER)])


def restart_points(d: int, restarts: int, seed: int, incumbent: KernelHyperparams | None = None) -> np.ndarray:
    """Log-space start points; the incumbent, if any, replaces the first draw."""
    if restarts < 1:
        raise InvalidArgumentError("restarts must be >= 1")
    lo, hi = np.log(hyper_box(d)).T
    rng = substream(seed, "gp-restarts")
    starts = lo + (hi - lo) * rng.random((restarts, 2))
    if incumbent is not None:
        starts[0] = np.clip(incumbent.as_log(), lo, hi)
    return starts


def fit_hyperparameters(data: Dataset, mean, restarts: int = 10, seed: int = 0,
                        incumbent: KernelHyperparams | None = None) -> KernelHyperparams:
    """Maximise the log marginal likelihood over the hyperparameter box.

    Deterministic given ``seed``. Start points count as candidates, so the
    result is never worse than any start.
    """
    starts = restart_points(data.d, restarts, seed, incumbent)
    bounds = np.log(hyper_box(data.d))
    resid = data.f - mean(data.X)
    dist = _distances(data.X, data.X)

    def objective(z):
        try:
            v, g = mll_and_gradient(z, data, resid, dist)
        except SingularKernelError:
            return 1e25, np.zeros(2)
        if not np.isfinite(v):
            return 1e25, np.zeros(2)
        return -v, -g

    best_z, best_v = None, -np.inf
    for z0 in starts:
        v0 = -objective(z0)[0]
        if v0 > best_v:
            best_z, best_v = z0, v0
        try:
            res = minimize(objective, z0, jac=True, method="L-BFGS-B", bounds=bounds)
        except (ValueError, FloatingPointError):
            continue
        v = -float(res.fun)
        if np.isfinite(v) and v > best_v and v < 1e25:
            best_z, best_v = np.clip(res.x, bounds[:, 0], bounds[:, 1]), v
    if best_z is None or best_v <= -1e25:
        warnings.warn("all hyperparameter restarts failed; using mid-box values", RuntimeWarning)
        mid = np.exp(bounds.mean(axis=1))
        return KernelHyperparams(float(mid[0]), float(mid[1]), fallback=True)
    theta = np.exp(best_z)
    return KernelHyperparams(float(theta[0]), float(theta[1]))
