"""Build the synthetic triple (X', A', Y') from a clustering of representations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cluster import Clustering, cluster_means, sketching_matrices
from .graph import SparseGraph


@dataclass
class CondensedGraph:
    """Synthetic attributed graph: dense weighted adjacency, one-hot labels."""

    x_prime: np.ndarray  # (n, d)
    a_prime: np.ndarray  # (n, n) symmetric, nonnegative
    y_prime: np.ndarray  # (n, K) one-hot
    meta: dict = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return self.x_prime.shape[0]

    @property
    def num_classes(self) -> int:
        return self.y_prime.shape[1]

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.y_prime, axis=1)

    def validate(self) -> None:
        n = self.num_nodes
        if self.a_prime.shape != (n, n):
            raise ValueError("A' must be (n, n)")
        if self.y_prime.shape[0] != n:
            raise ValueError("Y' row count must be n")
        if np.max(np.abs(self.a_prime - self.a_prime.T)) > 1e-12:
            raise ValueError("A' must be symmetric within 1e-12")
        if self.a_prime.min() < -1e-12:
            raise ValueError("A' must be nonnegative")
        row_sums = self.y_prime.sum(axis=1)
        if not np.all(row_sums == 1.0) or not np.all(
            (self.y_prime == 0.0) | (self.y_prime == 1.0)
        ):
            raise ValueError("Y' must be one-hot")


def condense_attributes(clustering: Clustering, Z: np.ndarray) -> np.ndarray:
    """X' rows are the per-cluster means of the smoothed attributes."""
    return cluster_means(clustering, Z)


def condense_adjacency(clustering: Clustering, a_norm: SparseGraph) -> np.ndarray:
    """A' = C_norm^T A_norm C_norm, densified and numerically symmetrized."""
    _, c_norm = sketching_matrices(clustering)
    m = (c_norm.T @ (a_norm.to_scipy() @ c_norm)).toarray()
    return 0.5 * (m + m.T)


def condense_labels(
    clustering: Clustering, H: np.ndarray, num_classes: int
) -> np.ndarray:
    """One-hot labels from the argmax of per-cluster mean representations.

    H columns must align with class scores (shape (N, K)); argmax ties go
    to the lowest class index.
    """
    means = cluster_means(clustering, H)
    if means.shape[1] != num_classes:
        raise ValueError("H must have one column per class")
    picks = np.argmax(means, axis=1)
    out = np.zeros((clustering.num_clusters, num_classes))
    out[np.arange(clustering.num_clusters), picks] = 1.0
    return out


def condensed_representations(clustering: Clustering, H: np.ndarray) -> np.ndarray:
    """H' rows are per-cluster means of the full-graph representations."""
    return cluster_means(clustering, H)


def sparsify_condensed(a_prime: np.ndarray, epsilon: float = 0.0) -> np.ndarray:
    """Zero out entries strictly below epsilon * max(A'). epsilon 0 is identity."""
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    a = np.array(a_prime, dtype=np.float64, copy=True)
    if epsilon == 0.0 or a.size == 0:
        return a
    threshold = epsilon * a.max()
    a[a < threshold] = 0.0
    return a
