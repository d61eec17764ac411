"""Expected Improvement and UCB (minimisation form) and their maximisation
over the unit cube."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import erfc
from scipy.stats import qmc

from .errors import InvalidArgumentError
from .seeding import derive_seed

INV_SQRT2 = 1.0 / math.sqrt(2.0)
INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def norm_cdf(s):
    return 0.5 * erfc(-np.asarray(s, dtype=float) * INV_SQRT2)


def norm_pdf(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore"):
        return INV_SQRT2PI * np.exp(-0.5 * s * s)


@dataclass(frozen=True)
class MultistartParams:
    n_raw: int | None = None  # None: 1000 * d capped at 5000
    n_local: int = 10
    seed: int = 0

    def resolve(self, d: int) -> tuple[int, int]:
        n_raw = min(1000 * d, 5000) if self.n_raw is None else self.n_raw
        if not 1 <= self.n_local <= n_raw:
            raise InvalidArgumentError("need 1 <= n_local <= n_raw")
        return n_raw, self.n_local


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: str = "EI"
    ucb_delta: float = 0.1
    multistart: MultistartParams = field(default_factory=MultistartParams)

    def __post_init__(self):
        if self.kind not in ("EI", "UCB"):
            raise InvalidArgumentError(f"unknown acquisition {self.kind!r}")
        if not 0.0 < self.ucb_delta < 1.0:
            raise InvalidArgumentError("ucb_delta must lie in (0, 1)")


def expected_improvement(mu, sigma, f_best):
    """EI for minimisation; ``max(f_best - mu, 0)`` where ``sigma == 0``.

    Scalars in, float out; arrays broadcast.
    """
    mu, sigma, f_best = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, sigma, f_best)))
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma)) and np.all(np.isfinite(f_best))):
        raise InvalidArgumentError("non-finite input to expected_improvement")
    if np.any(sigma < 0):
        raise InvalidArgumentError("sigma must be >= 0")
    imp = f_best - mu
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    s = imp / safe
    ei = np.where(pos, safe * (s * norm_cdf(s) + norm_pdf(s)), np.maximum(imp, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def upper_confidence_bound(mu, sigma, beta):
    if np.any(np.asarray(beta) < 0):
        raise InvalidArgumentError("beta must be >= 0")
    val = -(np.asarray(mu, dtype=float) - np.sqrt(beta) * np.asarray(sigma, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


def beta_schedule(t: int, d: int, delta: float = 0.1) -> float:
    """``2 log(d t^2 pi^2 / (6 delta))``, the finite-domain confidence schedule."""
    if t < 1 or d < 1:
        raise InvalidArgumentError("need t >= 1 and d >= 1")
    return 2.0 * math.log(d * t * t * math.pi**2 / (6.0 * delta))


def _acq_values(gp, spec, f_best, beta, X):
    mu, s2 = gp.predict_batch(X)
    sigma = np.sqrt(s2)
    if spec.kind == "EI":
        return expected_improvement(mu, sigma, f_best)
    return upper_confidence_bound(mu, sigma, beta)


def _acq_and_grad(gp, spec, f_best, beta, x):
    mu, s2, dmu, ds2 = gp.predict_with_gradient(x)
    sigma = math.sqrt(s2)
    dsigma = ds2 / (2.0 * sigma) if sigma > 0 else np.zeros_like(ds2)
    if spec.kind == "UCB":
        rb = math.sqrt(beta)
        return -(mu - rb * sigma), -(dmu - rb * dsigma)
    if sigma <= 0:
        imp = f_best - mu
        return max(imp, 0.0), (-dmu if imp > 0 else np.zeros_like(dmu))
    s = (f_best - mu) / sigma
    cdf, pdf = float(norm_cdf(s)), float(norm_pdf(s))
    return max(sigma * (s * cdf + pdf), 0.0), -cdf * dmu + pdf * dsigma


def maximise_acquisition(gp, spec: AcquisitionSpec, f_best: float, t: int, seed: int = 0,
                         return_value: bool = False):
    """Quasi-random screening followed by L-BFGS-B refinement of the best candidates.

    Candidates are ordered raw points first, then refined points by start
    rank; the first maximal one wins.
    """
    d = gp.data.d
    n_raw, n_local = spec.multistart.resolve(d)
    beta = beta_schedule(t, d, spec.ucb_delta) if spec.kind == "UCB" else 0.0
    sampler = qmc.Halton(d=d, scramble=True, seed=derive_seed(seed, "acq-raw"))
    raw = sampler.random(n_raw)
    vals = _acq_values(gp, spec, f_best, beta, raw)
    order = np.argsort(-vals, kind="stable")
    best_x, best_v = raw[order[0]].copy(), float(vals[order[0]])
    bounds = [(0.0, 1.0)] * d
    # offset and scale from the screened values so the stopping rule is
    # unaffected by shifts or tiny magnitudes of the acquisition
    scale = max(float(vals[order[0]] - vals.min()), 1e-300)
    for i in order[:n_local]:
        ref = float(vals[i])

        def obj(z):
            v, g = _acq_and_grad(gp, spec, f_best, beta, z)
            return -(v - ref) / scale, -np.asarray(g) / scale

        try:
            res = minimize(obj, raw[i], jac=True, method="L-BFGS-B", bounds=bounds)
        except (ValueError, ArithmeticError):
            continue
        x = np.clip(res.x, 0.0, 1.0)
        v = float(_acq_values(gp, spec, f_best, beta, x[None, :])[0])
        if np.isfinite(v) and v > best_v:
            best_x, best_v = x, v
    return (best_x, best_v) if return_value else best_x
