"""Lloyd k-means with k-means++ seeding, plus a mini-batch variant.

Written in-repo rather than wrapping a library so the pinned behaviors
hold exactly: seeding draws from the caller's generator, assignment ties
go to the lowest centroid index, empty clusters are repaired with the
farthest point, and runs are bit-deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class Clustering:
    """Hard partition of N points into nonempty clusters."""

    assignment: np.ndarray  # (N,) cluster index per point
    num_clusters: int
    sizes: np.ndarray  # (n,) all >= 1
    centroids: np.ndarray  # (n, dim)
    wcss_trace: list[float] = field(default_factory=list)


def _pairwise_sq(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    sq_p = np.einsum("ij,ij->i", points, points)[:, None]
    sq_c = np.einsum("ij,ij->i", centers, centers)[None, :]
    d = sq_p + sq_c - 2.0 * points @ centers.T
    np.maximum(d, 0.0, out=d)
    return d


def _kmeans_pp(
    points: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Classic k-means++ seeding; indices are distinct by construction."""
    N = points.shape[0]
    chosen = np.empty(n, dtype=np.int64)
    chosen[0] = rng.integers(N)
    dist = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for k in range(1, n):
        total = dist.sum()
        if total <= 0.0:
            remaining = np.setdiff1d(np.arange(N), chosen[:k])
            chosen[k] = rng.choice(remaining)
        else:
            chosen[k] = rng.choice(N, p=dist / total)
        dist = np.minimum(dist, np.sum((points - points[chosen[k]]) ** 2, axis=1))
    return points[chosen].copy()


def _assign(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # argmin returns the lowest index on ties
    return np.argmin(_pairwise_sq(points, centers), axis=1)


def _repair_empty(
    points: np.ndarray, centers: np.ndarray, assignment: np.ndarray
) -> np.ndarray:
    """Give each empty cluster the point farthest from its current centroid.

    Only points from clusters of size >= 2 are eligible, so no donor
    cluster is emptied in turn.
    """
    n = centers.shape[0]
    sizes = np.bincount(assignment, minlength=n)
    while np.any(sizes == 0):
        empty = int(np.argmin(sizes))
        dist = np.sum((points - centers[assignment]) ** 2, axis=1)
        dist[sizes[assignment] < 2] = -np.inf
        donor = int(np.argmax(dist))
        sizes[assignment[donor]] -= 1
        assignment[donor] = empty
        sizes[empty] = 1
        centers[empty] = points[donor]
    return assignment


def _means(points: np.ndarray, assignment: np.ndarray, n: int) -> np.ndarray:
    sums = np.zeros((n, points.shape[1]))
    np.add.at(sums, assignment, points)
    sizes = np.bincount(assignment, minlength=n)
    return sums / sizes[:, None]


def wcss(points: np.ndarray, clustering: Clustering) -> float:
    """Within-cluster sum of squares against per-cluster means."""
    means = _means(points, clustering.assignment, clustering.num_clusters)
    return float(np.sum((points - means[clustering.assignment]) ** 2))


def _wcss_raw(points: np.ndarray, centers: np.ndarray, assignment: np.ndarray) -> float:
    return float(np.sum((points - centers[assignment]) ** 2))


def _lloyd(
    points: np.ndarray,
    centers: np.ndarray,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    n = centers.shape[0]
    assignment = _assign(points, centers)
    assignment = _repair_empty(points, centers, assignment)
    trace = [_wcss_raw(points, _means(points, assignment, n), assignment)]
    # trace[0] is the post-seeding objective; one entry follows per iteration
    for _ in range(max_iter):
        new_centers = _means(points, assignment, n)
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        assignment = _assign(points, centers)
        assignment = _repair_empty(points, centers, assignment)
        trace.append(_wcss_raw(points, _means(points, assignment, n), assignment))
        if shift < tol:
            break
    centers = _means(points, assignment, n)
    return assignment, centers, trace


def kmeans(
    points: np.ndarray,
    n: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-4,
    n_init: int = 10,
) -> Clustering:
    """Best of n_init seeded k-means++ Lloyd runs.

    Args:
        points: (N, dim) data.
        n: cluster count, 1 <= n <= N.
        seed: generator seed; all randomness flows from it.
        max_iter: Lloyd iteration cap per run.
        tol: stop when the largest centroid shift falls below this.
        n_init: independent seedings; the lowest-WCSS run wins, first on ties.
    """
    points = np.asarray(points, dtype=np.float64)
    N = points.shape[0]
    if not 1 <= n <= N:
        raise ValueError("cluster count must satisfy 1 <= n <= N")
    rng = np.random.default_rng(seed)
    best: tuple[float, np.ndarray, np.ndarray, list[float]] | None = None
    for _ in range(max(1, n_init)):
        centers = _kmeans_pp(points, n, rng)
        assignment, centers, trace = _lloyd(points, centers, max_iter, tol)
        score = trace[-1]
        if best is None or score < best[0]:
            best = (score, assignment, centers, trace)
    _, assignment, centers, trace = best
    sizes = np.bincount(assignment, minlength=n)
    return Clustering(assignment, n, sizes, centers, trace)


def minibatch_kmeans(
    points: np.ndarray,
    n: int,
    seed: int = 0,
    max_iter: int = 300,
    batch_size: int = 1000,
    tol: float = 1e-4,
) -> Clustering:
    """Streaming centroid updates on seeded batches.

    A batch size of at least N degenerates to the full-batch routine and
    reproduces its trajectory for the same seed.
    """
    points = np.asarray(points, dtype=np.float64)
    N = points.shape[0]
    if batch_size >= N:
        return kmeans(points, n, seed=seed, max_iter=max_iter, tol=tol)
    if not 1 <= n <= N:
        raise ValueError("cluster count must satisfy 1 <= n <= N")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(points, n, rng)
    counts = np.zeros(n)
    calm = 0
    for _ in range(max_iter):
        batch = rng.choice(N, size=batch_size, replace=False)
        pts = points[batch]
        labels = _assign(pts, centers)
        shift = 0.0
        for c in np.unique(labels):
            members = pts[labels == c]
            counts[c] += members.shape[0]
            step = (members.sum(axis=0) - members.shape[0] * centers[c]) / counts[c]
            centers[c] = centers[c] + step
            shift = max(shift, float(np.linalg.norm(step)))
        calm = calm + 1 if shift < tol else 0
        if calm >= 3:
            break
    assignment = _assign(points, centers)
    assignment = _repair_empty(points, centers, assignment)
    centers = _means(points, assignment, n)
    sizes = np.bincount(assignment, minlength=n)
    return Clustering(
        assignment, n, sizes, centers, [_wcss_raw(points, centers, assignment)]
    )


def sketching_matrices(clustering: Clustering) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """(C, C_norm): binary membership and its column-stochastic rescaling.

    C is N x n with C[j, i] = 1 iff point j sits in cluster i; C_norm divides
    each column by the cluster size so columns sum to one.
    """
    a = clustering.assignment
    N = a.shape[0]
    n = clustering.num_clusters
    rows = np.arange(N)
    C = sp.csr_matrix((np.ones(N), (rows, a)), shape=(N, n))
    C_norm = sp.csr_matrix(
        (1.0 / clustering.sizes[a], (rows, a)), shape=(N, n)
    )
    return C, C_norm


def cluster_means(clustering: Clustering, H: np.ndarray) -> np.ndarray:
    """Apply the rescaled-membership transpose to H: row i is the mean of cluster i.

    Grouped sum-then-divide, so each output row is the arithmetic mean of
    its member rows without extra rounding.
    """
    H = np.asarray(H, dtype=np.float64)
    sums = np.zeros((clustering.num_clusters, H.shape[1]))
    np.add.at(sums, clustering.assignment, H)
    return sums / clustering.sizes[:, None]
