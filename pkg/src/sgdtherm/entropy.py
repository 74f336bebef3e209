"""Differential entropy estimation from the k-nearest-neighbor graph.

The estimate is S = D * (log L_k - ((D-1)/D) * log N), where L_k is the
total edge length of the directed k-NN graph over N samples in R^D (each
point contributes the distances to its k nearest neighbors).  The value is
defined up to an additive constant that does not depend on the sampled
distribution, which is all the downstream temperature analysis needs: only
entropy differences enter there.

Neighbor search is exact brute force.  Pairwise squared distances are
computed on mean-centered samples via the Gram matrix, which keeps the
computation O(N^2 D), deterministic, and numerically stable even for
windows concentrated in a tiny region far from the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, NonPositiveEdgeLength, TooFewSamples

_CHUNK_ROWS = 2048


@dataclass(frozen=True)
class EntropyConfig:
    """k-NN entropy settings and the sliding-window layout over trajectories."""

    k: int = 50
    window: int = 1000
    stride: int | None = None  # None: disjoint windows (stride = window)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.window <= self.k:
            raise InvalidConfig("window must exceed k")
        if self.stride is not None and self.stride < 1:
            raise InvalidConfig("stride must be >= 1")

    @property
    def effective_stride(self) -> int:
        return self.window if self.stride is None else self.stride


def _as_sample_matrix(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise InvalidConfig(f"samples must be a 2-D array, got shape {x.shape}")
    return x


def knn_neighbor_distances(samples, k: int) -> np.ndarray:
    """(N, k) Euclidean distances from each point to its k nearest neighbors.

    The k distances per row form the exact smallest multiset (ties at the
    k-th distance contribute the tied value, so the row sum is unambiguous);
    they are not returned in sorted order.
    """
    x = _as_sample_matrix(samples)
    n = x.shape[0]
    if n <= k:
        raise TooFewSamples(f"need more than k={k} samples, got {n}")
    centered = x - x.mean(axis=0)
    sq = np.einsum("ij,ij->i", centered, centered)
    out = np.empty((n, k))
    for start in range(0, n, _CHUNK_ROWS):
        stop = min(start + _CHUNK_ROWS, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (centered[start:stop] @ centered.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(start, stop) - start, np.arange(start, stop)] = np.inf
        out[start:stop] = np.partition(d2, k - 1, axis=1)[:, :k]
    return np.sqrt(out)


def knn_total_edge_length(samples, k: int) -> float:
    """Total edge length of the directed k-NN graph (N*k edges)."""
    return float(knn_neighbor_distances(samples, k).sum())


def degenerate_edge_count(samples, k: int) -> int:
    """Number of zero-length k-NN edges (coincident sample pairs)."""
    return int(np.count_nonzero(knn_neighbor_distances(samples, k) == 0.0))


def knn_entropy(samples, k: int, dim: int | None = None) -> float:
    """Entropy estimate D * (log L_k - ((D-1)/D) * log N), up to an additive constant.

    Scaling all samples by c > 0 shifts the estimate by exactly D * log c;
    translations and rotations leave it unchanged.  Raises
    NonPositiveEdgeLength when every sample coincides (L_k = 0).
    """
    x = _as_sample_matrix(samples)
    n = x.shape[0]
    d = x.shape[1] if dim is None else dim
    total = knn_total_edge_length(x, k)
    if total <= 0.0:
        raise NonPositiveEdgeLength("all samples identical: entropy estimate is -inf")
    return float(d * np.log(total) - (d - 1) * np.log(n))


def sliding_window_entropy(
    snapshots, cfg: EntropyConfig, iters: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Entropy of consecutive windows over an ordered snapshot matrix.

    Windows hold cfg.window consecutive rows and advance by cfg.stride
    (default: disjoint).  Each estimate is anchored to the iteration of the
    window's final row; `iters` defaults to 1..N.  Returns (anchors, values).
    """
    x = _as_sample_matrix(snapshots)
    n = x.shape[0]
    if n < cfg.window:
        raise TooFewSamples(f"need at least window={cfg.window} snapshots, got {n}")
    if iters is None:
        iters = np.arange(1, n + 1, dtype=np.int64)
    else:
        iters = np.asarray(iters)
        if iters.shape[0] != n:
            raise InvalidConfig("iters must align with snapshots")
    stride = cfg.effective_stride
    anchors, values = [], []
    for start in range(0, n - cfg.window + 1, stride):
        block = x[start : start + cfg.window]
        anchors.append(iters[start + cfg.window - 1])
        values.append(knn_entropy(block, cfg.k))
    return np.asarray(anchors), np.asarray(values, dtype=float)
