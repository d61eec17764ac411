"""Maximin Latin hypercube designs on the unit cube."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import InvalidArgumentError
from .seeding import substream


@dataclass(frozen=True)
class LHSDesign:
    points: np.ndarray
    seed: int
    n_candidates: int
    min_distance: float


def random_lhs(M: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """One LHS: a random permutation of bins per column, jittered inside each bin."""
    perms = np.argsort(rng.random((M, d)), axis=0)
    return (perms + rng.random((M, d))) / M


def min_pairwise_distance(points: np.ndarray) -> float:
    if points.shape[0] < 2:
        return float("inf")
    return float(pdist(points).min())


def latin_hypercube(M: int, d: int, seed: int, n_candidates: int = 1000) -> LHSDesign:
    """Best of ``n_candidates`` random LHS designs under the maximin criterion.

    The first candidate achieving the largest minimum distance wins.
    """
    if M < 1 or d < 1 or n_candidates < 1:
        raise InvalidArgumentError("need M, d, n_candidates >= 1")
    rng = substream(seed, "lhs", M, d)
    best, best_dist = None, -1.0
    for _ in range(n_candidates):
        cand = random_lhs(M, d, rng)
        dist = min_pairwise_distance(cand)
        if dist > best_dist:
            best, best_dist = cand, dist
    return LHSDesign(best, int(seed), int(n_candidates), best_dist)
