"""Seeded k-means++ / Lloyd clustering of intent embeddings."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DomainError
from ..rng import SplitMix64
from .embedding import IntentEmbedding


@dataclass(frozen=True)
class IntentCluster:
    assignments: tuple[int, ...]
    centroids: tuple[tuple[float, ...], ...]
    k: int
    sse: float
    sse_history: tuple[float, ...] = ()
    iterations: int = 0

    def nearest(self, vector: Sequence[float]) -> int:
        """Index of the closest centroid (lowest index on ties)."""
        c = np.asarray(self.centroids)
        d = ((c - np.asarray(vector, dtype=float)) ** 2).sum(axis=1)
        return int(np.argmin(d))


def _sq_dist(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def kmeans_plus_plus(points: np.ndarray, k: int, rng: SplitMix64) -> np.ndarray:
    n = len(points)
    chosen = [rng.randbelow(n)]
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        idx = rng.choice_weighted(d2.tolist())
        chosen.append(idx)
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(points, k: int, seed: int = 0, max_iters: int = 100) -> IntentCluster:
    """Lloyd iterations from a k-means++ start, stopping once assignments settle.

    An empty cluster is re-seeded at the point farthest from its centroid.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or len(x) == 0:
        raise DomainError("points must be a non-empty 2-D array")
    n = len(x)
    if not (1 <= k <= n):
        raise DomainError(f"k={k} outside [1, {n}]")
    if max_iters < 1:
        raise DomainError("max_iters must be at least 1")

    centroids = kmeans_plus_plus(x, k, SplitMix64(seed))
    history: list[float] = []
    labels = None
    iterations = 0
    for iterations in range(1, max_iters + 1):
        d = _sq_dist(x, centroids)
        new_labels = np.argmin(d, axis=1)
        history.append(float(d[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = _update(x, labels, centroids, k)

    centroids = _update(x, labels, centroids, k)
    sse = float(((x - centroids[labels]) ** 2).sum())
    return IntentCluster(
        assignments=tuple(int(v) for v in labels),
        centroids=tuple(tuple(float(v) for v in c) for c in centroids),
        k=k,
        sse=sse,
        sse_history=tuple(history),
        iterations=iterations,
    )


def _update(x: np.ndarray, labels: np.ndarray, old: np.ndarray, k: int) -> np.ndarray:
    new = old.copy()
    for j in range(k):
        members = labels == j
        if members.any():
            new[j] = x[members].mean(axis=0)
        else:
            far = int(np.argmax(((x - old[labels]) ** 2).sum(axis=1)))
            new[j] = x[far]
    return new


def cluster_intents(
    embeddings: Sequence[IntentEmbedding], k: int = 4, seed: int = 0, max_iters: int = 100
) -> IntentCluster:
    """Cluster embeddings in canonical id order; assignments follow input order."""
    if not embeddings:
        raise DomainError("no embeddings to cluster")
    order = sorted(range(len(embeddings)), key=lambda i: (embeddings[i].id, i))
    canonical = kmeans([embeddings[i].vector for i in order], k, seed, max_iters)
    assignments = [0] * len(embeddings)
    for pos, i in enumerate(order):
        assignments[i] = canonical.assignments[pos]
    return IntentCluster(
        tuple(assignments), canonical.centroids, k, canonical.sse, canonical.sse_history, canonical.iterations
    )
