"""Exact k-nearest-neighbour graphs and their mutual subgraph."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .io import FeatureMatrix

METRICS = ("euclidean", "cosine", "jaccard")


@dataclass(frozen=True)
class NeighborGraph:
    """Directed k-NN rows: ``indices[i]`` sorted by ``(distance, index)``."""

    indices: np.ndarray
    distances: np.ndarray

    @property
    def n_points(self) -> int:
        return self.indices.shape[0]

    @property
    def k(self) -> int:
        return self.indices.shape[1]

    def truncate(self, k: int) -> "NeighborGraph":
        """Rows restricted to the first ``k`` neighbours (exact for a smaller k)."""
        if not 1 <= k <= self.k:
            raise ValueError(f"cannot truncate a {self.k}-NN graph to k={k}")
        return NeighborGraph(self.indices[:, :k].copy(), self.distances[:, :k].copy())

    def symmetrized(self) -> "WeightedGraph":
        """Undirected union of all k-NN edges."""
        rows = np.repeat(np.arange(self.n_points), self.k)
        return WeightedGraph.from_edges(
            self.n_points, rows, self.indices.ravel(), self.distances.ravel()
        )


class WeightedGraph:
    """Undirected graph stored as symmetric CSR-style adjacency arrays.

    Zero weights are legal (duplicate points), so scipy sparse matrices are
    not used as storage: they drop explicit zeros on many operations.
    """

    def __init__(self, n_vertices, indptr, indices, weights):
        self.n_vertices = int(n_vertices)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.float64)

    @classmethod
    def from_edges(cls, n_vertices, u, v, w) -> "WeightedGraph":
        """Build from undirected edges; repeated pairs keep the smallest weight."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        w = np.asarray(w, dtype=np.float64)
        if np.any(u == v):
            raise ValueError("self-loops are not allowed")
        if w.size and (not np.all(np.isfinite(w)) or w.min() < 0):
            raise ValueError("edge weights must be finite and non-negative")
        if u.size and (min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n_vertices):
            raise ValueError("edge endpoint out of range")
        lo, hi = np.minimum(u, v), np.maximum(u, v)
        order = np.lexsort((w, hi, lo))
        lo, hi, w = lo[order], hi[order], w[order]
        keep = np.ones(lo.size, dtype=bool)
        keep[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        lo, hi, w = lo[keep], hi[keep], w[keep]

        src = np.concatenate([lo, hi])
        dst = np.concatenate([hi, lo])
        ww = np.concatenate([w, w])
        order = np.lexsort((dst, src))
        src, dst, ww = src[order], dst[order], ww[order]
        indptr = np.zeros(n_vertices + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n_vertices), out=indptr[1:])
        return cls(n_vertices, indptr, dst, ww)

    @classmethod
    def empty(cls, n_vertices) -> "WeightedGraph":
        return cls(n_vertices, np.zeros(n_vertices + 1, dtype=np.int64), [], [])

    def edges(self):
        """Arrays ``(u, v, w)`` with ``u < v``, sorted by ``(u, v)``."""
        src = np.repeat(np.arange(self.n_vertices), np.diff(self.indptr))
        mask = src < self.indices
        return src[mask], self.indices[mask], self.weights[mask]

    @property
    def n_edges(self) -> int:
        return self.indices.size // 2

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]

    def edge_set(self) -> set:
        u, v, _ = self.edges()
        return set(zip(u.tolist(), v.tolist()))

    def union(self, other: "WeightedGraph") -> "WeightedGraph":
        if other.n_vertices != self.n_vertices:
            raise ValueError("vertex counts differ")
        u1, v1, w1 = self.edges()
        u2, v2, w2 = other.edges()
        return WeightedGraph.from_edges(
            self.n_vertices,
            np.concatenate([u1, u2]),
            np.concatenate([v1, v2]),
            np.concatenate([w1, w2]),
        )

    def structure(self) -> sp.csr_matrix:
        """0/1 adjacency for structural algorithms (weights discarded)."""
        ones = np.ones(self.indices.size, dtype=np.int8)
        return sp.csr_matrix(
            (ones, self.indices, self.indptr), shape=(self.n_vertices, self.n_vertices)
        )

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (
            self.n_vertices == other.n_vertices
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self):
        return f"WeightedGraph(n_vertices={self.n_vertices}, n_edges={self.n_edges})"

    def write_edge_list(self, path) -> None:
        """Debug dump: one ``u v w`` line per undirected edge."""
        u, v, w = self.edges()
        with open(path, "w") as fh:
            for a, b, c in zip(u, v, w):
                fh.write(f"{a} {b} {float(c)!r}\n")


def distance(x, y, metric: str = "euclidean") -> float:
    """Distance between two dense rows.

    Cosine distance against a zero vector is 1.0; Jaccard between two
    all-zero rows is 0.0. Jaccard uses the sets of non-zero coordinates.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"rows differ in length: {x.size} vs {y.size}")
    if metric == "euclidean":
        return float(np.sqrt(np.sum((x - y) ** 2)))
    if metric == "cosine":
        nx, ny = np.sqrt(np.dot(x, x)), np.sqrt(np.dot(y, y))
        if nx == 0.0 or ny == 0.0:
            return 1.0
        return float(max(0.0, 1.0 - np.dot(x, y) / (nx * ny)))
    if metric == "jaccard":
        a, b = x != 0, y != 0
        union = np.count_nonzero(a | b)
        if union == 0:
            return 0.0
        return float(1.0 - np.count_nonzero(a & b) / union)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


class _Distances:
    """Blocked approximate all-pairs distances plus exact per-row recompute."""

    def __init__(self, X, metric):
        if metric not in METRICS:
            raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
        self.metric = metric
        self.sparse = sp.issparse(X)
        if metric == "jaccard":
            X = (X != 0).astype(np.float64)
            if self.sparse:
                X = sp.csr_matrix(X)
        self.X = X
        self.XT = X.T.tocsr() if self.sparse else X.T
        sq = X.multiply(X).sum(axis=1) if self.sparse else np.einsum("ij,ij->i", X, X)
        self.sq = np.asarray(sq, dtype=np.float64).ravel()
        self.norm = np.sqrt(self.sq)

    def block(self, rows: slice) -> np.ndarray:
        dots = self.X[rows] @ self.XT
        dots = dots.toarray() if sp.issparse(dots) else np.asarray(dots)
        sq_r = self.sq[rows]
        if self.metric == "euclidean":
            d2 = sq_r[:, None] + self.sq[None, :] - 2.0 * dots
            return np.sqrt(np.maximum(d2, 0.0))
        if self.metric == "cosine":
            denom = self.norm[rows][:, None] * self.norm[None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                d = 1.0 - dots / denom
            d[denom == 0] = 1.0
            return np.maximum(d, 0.0)
        union = sq_r[:, None] + self.sq[None, :] - dots
        with np.errstate(divide="ignore", invalid="ignore"):
            d = 1.0 - dots / union
        d[union == 0] = 0.0
        return d

    def exact(self, i: int, cand: np.ndarray) -> np.ndarray:
        """Distances from row ``i`` to ``cand``, free of cancellation error."""
        X = self.X
        if self.metric == "euclidean":
            if self.sparse:
                diff = X[cand] - X[np.full(cand.size, i)]
                return np.sqrt(np.asarray(diff.multiply(diff).sum(axis=1)).ravel())
            diff = X[cand] - X[i]
            return np.sqrt(np.einsum("ij,ij->i", diff, diff))
        if self.sparse:
            dots = np.asarray((X[cand] @ X[i].T).todense()).ravel()
        else:
            dots = X[cand] @ X[i]
        if self.metric == "cosine":
            denom = self.norm[cand] * self.norm[i]
            with np.errstate(divide="ignore", invalid="ignore"):
                d = 1.0 - dots / denom
            d[denom == 0] = 1.0
            return np.maximum(d, 0.0)
        union = self.sq[cand] + self.sq[i] - dots
        with np.errstate(divide="ignore", invalid="ignore"):
            d = 1.0 - dots / union
        d[union == 0] = 0.0
        return d


def exact_knn(data: FeatureMatrix, k: int, metric: str = "euclidean",
              block_bytes: int = 200_000_000) -> NeighborGraph:
    """Brute-force k nearest neighbours of every point, self excluded.

    Each row is ordered by ascending distance with ties broken by ascending
    index. Candidates are screened with blocked matrix products, then their
    distances are recomputed directly so duplicates come out as exactly 0.
    """
    if isinstance(data, FeatureMatrix):
        X = data.data
    else:
        X = FeatureMatrix(data).data
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n_points ({n}), got {k}")
    dist = _Distances(X, metric)
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)
    block = max(1, int(block_bytes // (8 * n)))
    for start in range(0, n, block):
        stop = min(n, start + block)
        approx = dist.block(slice(start, stop))
        local = np.arange(stop - start)
        approx[local, local + start] = np.inf
        kth = np.partition(approx, k - 1, axis=1)[:, k - 1]
        # slack covers rounding in the product-based screen
        if metric == "euclidean":
            scale = np.sqrt(dist.sq[start:stop] + dist.sq.max())
            slack = 1e-6 * scale + 1e-12
        else:
            slack = np.full(stop - start, 1e-9)
        for r in range(stop - start):
            i = start + r
            cand = np.flatnonzero(approx[r] <= kth[r] + slack[r])
            d = dist.exact(i, cand)
            order = np.lexsort((cand, d))[:k]
            indices[i] = cand[order]
            distances[i] = d[order]
    return NeighborGraph(indices, distances)


def mutual_knn(knn: NeighborGraph) -> WeightedGraph:
    """Keep edge (i, j) only when each endpoint lists the other among its k-NN."""
    n, k = knn.n_points, knn.k
    src = np.repeat(np.arange(n, dtype=np.int64), k)
    dst = knn.indices.ravel()
    w = knn.distances.ravel()
    forward = src * n + dst
    reverse = dst * n + src
    mutual = np.isin(forward, reverse) & (src < dst)
    return WeightedGraph.from_edges(n, src[mutual], dst[mutual], w[mutual])
