"""k-means under a diagonal metric (Lloyd's algorithm, k-means++ seeding)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DatasetView
from .metric import MetricWeights

NUM_RESTARTS = 5


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float


def _plusplus_seeds(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; degenerates to uniform picks when all distances are 0."""
    n = len(x)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            nxt = int(rng.choice(n, p=probs))
        else:
            nxt = int(rng.integers(n))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return np.array(chosen, dtype=np.intp)


def _lloyd(x: np.ndarray, k: int, rng: np.random.Generator, max_iters: int):
    n = len(x)
    centroids = x[_plusplus_seeds(x, k, rng)].copy()
    assignments = np.full(n, -1, dtype=np.intp)
    prev_inertia = np.inf
    for _ in range(max_iters):
        d2 = (
            np.sum(x * x, axis=1)[:, None]
            - 2.0 * x @ centroids.T
            + np.sum(centroids * centroids, axis=1)[None, :]
        )
        np.maximum(d2, 0.0, out=d2)
        new_assign = np.argmin(d2, axis=1)  # argmin breaks ties toward the lower index

        dist_own = d2[np.arange(n), new_assign]
        for c in range(k):
            members = new_assign == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
            else:
                # re-seed an empty cluster with the point farthest from its centroid
                far = int(np.argmax(dist_own))
                centroids[c] = x[far]
                if dist_own[far] > 0.0:
                    new_assign[far] = c
                dist_own[far] = -1.0  # a point reseeds at most one cluster

        inertia = float(np.sum((x - centroids[new_assign]) ** 2))
        assert inertia <= prev_inertia + 1e-9 * max(1.0, abs(prev_inertia))
        converged = np.array_equal(new_assign, assignments)
        assignments, prev_inertia = new_assign, inertia
        if converged:
            break
    return assignments, centroids, prev_inertia


def kmeans(
    train: DatasetView,
    w: MetricWeights,
    num_clusters: int,
    seed: int,
    max_iters: int = 100,
) -> Clustering:
    """Partition the view into clusters under the weighted squared distance.

    Runs Lloyd's algorithm in the space rescaled by sqrt(w) per feature,
    which is exactly k-means under the diagonal metric. Five seeded
    restarts; the lowest-inertia run wins, first run on ties. Centroids are
    reported in the original feature space.
    """
    n = len(train)
    if not (1 <= num_clusters <= n):
        raise ValueError(f"num_clusters must be in [1, {n}], got {num_clusters}")
    if w.dim != train.dim:
        raise ValueError("weight dimension does not match data")

    scale = np.sqrt(w.w)
    x = train.features * scale

    best = None
    seeds = np.random.SeedSequence(seed).spawn(NUM_RESTARTS)
    for restart in range(NUM_RESTARTS):
        rng = np.random.default_rng(seeds[restart])
        assignments, centroids_scaled, inertia = _lloyd(x, num_clusters, rng, max_iters)
        if best is None or inertia < best[2]:
            best = (assignments, centroids_scaled, inertia)

    assignments, centroids_scaled, inertia = best
    # undo the sqrt(w) rescale; zero-weight features keep the raw cluster mean
    centroids = np.empty_like(centroids_scaled)
    nonzero = scale > 0
    centroids[:, nonzero] = centroids_scaled[:, nonzero] / scale[nonzero]
    if (~nonzero).any():
        for c in range(num_clusters):
            members = assignments == c
            src = train.features[members] if members.any() else train.features
            centroids[c, ~nonzero] = src[:, ~nonzero].mean(axis=0)
    return Clustering(assignments=assignments, centroids=centroids, inertia=inertia)
