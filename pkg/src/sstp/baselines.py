"""Reference selection strategies: random, k-means representatives, herding.

All three consume the same feature matrix and budget as the submodular
selector so comparisons isolate selection quality.  Everything is
deterministic: random draws come from the seeded Philox streams and every
tie breaks to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError
from .rng import STREAM_KMEANS, STREAM_RANDOM_SELECT, make_rng


@dataclass(frozen=True)
class BaselineConfig:
    method: str = "random"  # random | kmeans | herding
    seed: int = 0
    kmeans_clusters: int = 0  # 0 means "use the budget"
    kmeans_max_iters: int = 100

    def validate(self):
        if self.method not in ("random", "kmeans", "herding"):
            raise ContractError(f"unknown baseline method {self.method!r}")
        if self.kmeans_clusters < 0 or self.kmeans_max_iters < 1:
            raise ContractError("bad k-means configuration")


def _check_budget(budget: int, size: int):
    if not (0 <= budget <= size):
        raise ContractError(f"budget {budget} out of range for {size} candidates")


def select_random(ids: Sequence[str], budget: int, seed: int) -> list[str]:
    """Uniform sample without replacement, in draw order."""
    _check_budget(budget, len(ids))
    rng = make_rng(seed, STREAM_RANDOM_SELECT)
    picks = rng.choice(len(ids), size=budget, replace=False)
    return [ids[i] for i in picks]


_ASSIGN_BLOCK = 1024


def _nearest_centroid(features: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # ||x - c||^2 = ||x||^2 + ||c||^2 - 2 x.c, blocked so memory stays
    # O(block * k); ties go to the lowest centroid index via argmin.
    c2 = (centroids**2).sum(axis=1)
    out = np.empty(features.shape[0], dtype=np.int64)
    for start in range(0, features.shape[0], _ASSIGN_BLOCK):
        block = features[start : start + _ASSIGN_BLOCK]
        d2 = (block**2).sum(axis=1)[:, None] + c2[None, :] - 2.0 * (block @ centroids.T)
        out[start : start + _ASSIGN_BLOCK] = np.argmin(d2, axis=1)
    return out


def _lloyd(features: np.ndarray, k: int, seed: int, max_iters: int):
    """Plain Lloyd iterations from seeded random-member centroids.

    Returns (assignments, centroids).  Empty clusters keep their previous
    centroid; assignment ties go to the lowest centroid index.
    """
    n = features.shape[0]
    rng = make_rng(seed, STREAM_KMEANS)
    centroids = features[rng.choice(n, size=k, replace=False)].copy()
    assign = np.full(n, -1)
    for _ in range(max_iters):
        new_assign = _nearest_centroid(features, centroids)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            mask = assign == c
            if mask.any():
                centroids[c] = features[mask].mean(axis=0)
    return assign, centroids


def select_kmeans(
    features: np.ndarray, ids: Sequence[str], budget: int, config: BaselineConfig
) -> list[str]:
    """One representative per cluster: the member nearest its centroid.

    Empty clusters leave a shortfall, filled round-robin from the largest
    clusters with their next-nearest unselected members.
    """
    config.validate()
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    _check_budget(budget, n)
    if budget == 0:
        return []
    if budget == n:
        return list(ids)
    k = min(config.kmeans_clusters or budget, n)
    assign, centroids = _lloyd(features, k, config.seed, config.kmeans_max_iters)

    dist_to_own = np.linalg.norm(features - centroids[assign], axis=1)
    selected: list[int] = []
    taken = np.zeros(n, dtype=bool)
    cluster_members = []
    for c in range(k):
        members = np.flatnonzero(assign == c)
        cluster_members.append(members[np.argsort(dist_to_own[members], kind="stable")])
        if len(members) > 0:
            rep = int(cluster_members[c][0])
            selected.append(rep)
            taken[rep] = True

    # Shortfall: one extra per round from the cluster with the most members
    # still available (ties to the lower cluster index).
    while len(selected) < budget:
        remaining = [int((~taken[m]).sum()) for m in cluster_members]
        c = int(np.argmax(remaining))
        if remaining[c] == 0:
            raise ContractError("k-means fill ran out of candidates")  # budget <= n, unreachable
        nxt = int(cluster_members[c][taken[cluster_members[c]].argmin()])
        selected.append(nxt)
        taken[nxt] = True

    return [ids[i] for i in selected[:budget]]


def select_herding(features: np.ndarray, ids: Sequence[str], budget: int) -> list[str]:
    """Greedily keep the selected-set mean close to the full mean."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    _check_budget(budget, n)
    mu = features.mean(axis=0) if n else np.zeros(features.shape[1])
    running = np.zeros(features.shape[1])
    taken = np.zeros(n, dtype=bool)
    order: list[int] = []
    for step in range(budget):
        cand_means = (running + features) / (step + 1)
        err = np.linalg.norm(cand_means - mu, axis=1)
        err[taken] = np.inf
        j = int(np.argmin(err))
        order.append(j)
        taken[j] = True
        running += features[j]
    return [ids[i] for i in order]
