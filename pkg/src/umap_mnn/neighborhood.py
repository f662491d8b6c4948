"""Local neighbourhoods from a repaired graph: adjacent or shortest-path."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .knn import NeighborGraph, WeightedGraph


@dataclass(frozen=True)
class LocalNeighborhoods:
    """Ragged per-point neighbour lists in CSR layout, ascending by distance."""

    indptr: np.ndarray
    indices: np.ndarray
    distances: np.ndarray
    mode: str
    k_new: Optional[int] = None

    @property
    def n_points(self) -> int:
        return self.indptr.size - 1

    def sizes(self) -> np.ndarray:
        return np.diff(self.indptr)

    def row(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.distances[lo:hi]

    @classmethod
    def from_knn(cls, knn: NeighborGraph) -> "LocalNeighborhoods":
        n, k = knn.indices.shape
        return cls(np.arange(0, n * k + 1, k, dtype=np.int64), knn.indices.ravel().copy(),
                   knn.distances.ravel().copy(), mode="knn", k_new=k)


def adjacent_neighbors(g_prime: WeightedGraph) -> LocalNeighborhoods:
    """Each point's neighbourhood is its adjacency in the repaired graph."""
    src = np.repeat(np.arange(g_prime.n_vertices), g_prime.degree())
    order = np.lexsort((g_prime.indices, g_prime.weights, src))
    return LocalNeighborhoods(
        g_prime.indptr.copy(), g_prime.indices[order], g_prime.weights[order], mode="adjacent"
    )


@numba.njit(cache=True)
def _heap_push(hd, hv, size, d, v):
    i = size
    hd[i] = d
    hv[i] = v
    while i > 0:
        p = (i - 1) // 2
        if hd[p] < hd[i] or (hd[p] == hd[i] and hv[p] <= hv[i]):
            break
        hd[p], hd[i] = hd[i], hd[p]
        hv[p], hv[i] = hv[i], hv[p]
        i = p
    return size + 1


@numba.njit(cache=True)
def _heap_pop(hd, hv, size):
    d, v = hd[0], hv[0]
    size -= 1
    hd[0] = hd[size]
    hv[0] = hv[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        right = left + 1
        if right < size and (hd[right] < hd[left] or (hd[right] == hd[left] and hv[right] < hv[left])):
            c = right
        if hd[i] < hd[c] or (hd[i] == hd[c] and hv[i] <= hv[c]):
            break
        hd[c], hd[i] = hd[i], hd[c]
        hv[c], hv[i] = hv[i], hv[c]
        i = c
    return d, v, size


@numba.njit(cache=True)
def _path_neighbors(indptr, indices, weights, k_new):
    n = indptr.size - 1
    max_deg = 0
    for i in range(n):
        max_deg = max(max_deg, indptr[i + 1] - indptr[i])
    capacity = max_deg * (k_new + 1) + 1
    hd = np.empty(capacity, dtype=np.float64)
    hv = np.empty(capacity, dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    out_idx = np.full((n, k_new), -1, dtype=np.int64)
    out_dist = np.zeros((n, k_new), dtype=np.float64)
    counts = np.zeros(n, dtype=np.int64)
    for src in range(n):
        stamp[src] = src
        size = 0
        for e in range(indptr[src], indptr[src + 1]):
            size = _heap_push(hd, hv, size, weights[e], indices[e])
        found = 0
        while size > 0 and found < k_new:
            d, y, size = _heap_pop(hd, hv, size)
            if stamp[y] == src:
                continue
            stamp[y] = src
            out_idx[src, found] = y
            out_dist[src, found] = d
            found += 1
            if found == k_new:
                break
            for e in range(indptr[y], indptr[y + 1]):
                v = indices[e]
                if stamp[v] != src:
                    size = _heap_push(hd, hv, size, d + weights[e], v)
        counts[src] = found
    return out_idx, out_dist, counts


def path_neighbors(g_prime: WeightedGraph, k_new: int) -> LocalNeighborhoods:
    """The ``k_new`` closest vertices by shortest-path distance in ``g_prime``.

    Runs an early-terminated Dijkstra from every vertex. Equal path lengths
    are resolved in favour of the lower vertex index.
    """
    if k_new < 1:
        raise ValueError("k_new must be >= 1")
    idx, dist, counts = _path_neighbors(g_prime.indptr, g_prime.indices, g_prime.weights, int(k_new))
    mask = np.arange(k_new)[None, :] < counts[:, None]
    indptr = np.zeros(g_prime.n_vertices + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return LocalNeighborhoods(indptr, idx[mask], dist[mask], mode="path", k_new=int(k_new))
