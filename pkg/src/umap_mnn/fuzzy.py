"""Fuzzy simplicial set construction from local neighbourhoods."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp

from .neighborhood import LocalNeighborhoods

SIGMA_TOL = 1e-5
SIGMA_ITERS = 64
SIGMA_FLOOR_SCALE = 1e-3


@dataclass(frozen=True)
class SmoothingParams:
    rho: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class FuzzyGraph:
    """Symmetric membership strengths in (0, 1], stored as CSR."""

    matrix: sp.csr_matrix

    @property
    def n_vertices(self) -> int:
        return self.matrix.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def write_edge_list(self, path) -> None:
        coo = sp.triu(self.matrix, k=1).tocoo()
        with open(path, "w") as fh:
            for a, b, c in zip(coo.row, coo.col, coo.data):
                fh.write(f"{a} {b} {float(c)!r}\n")


@numba.njit(cache=True)
def _rho(indptr, distances):
    n = indptr.size - 1
    rho = np.zeros(n)
    for i in range(n):
        best = np.inf
        for e in range(indptr[i], indptr[i + 1]):
            d = distances[e]
            if 0.0 < d < best:
                best = d
        if best < np.inf:
            rho[i] = best
    return rho


def compute_rho(neigh: LocalNeighborhoods) -> np.ndarray:
    """Smallest strictly positive neighbour distance per point (0 if none)."""
    return _rho(neigh.indptr, neigh.distances)


@numba.njit(cache=True)
def _membership_sum(distances, rho, sigma):
    total = 0.0
    for d in distances:
        gap = d - rho
        total += np.exp(-gap / sigma) if gap > 0.0 else 1.0
    return total


@numba.njit(cache=True)
def _solve_sigma(distances, rho, target, tol, n_iter, floor_scale):
    floor = floor_scale * np.mean(distances) if distances.size else 0.0
    if floor <= 0.0:
        floor = floor_scale
    # as sigma -> 0 the sum tends to the count of d <= rho and never goes below it
    at_rho = 0
    for d in distances:
        if d <= rho:
            at_rho += 1
    if target <= at_rho:
        return floor
    lo = 0.0
    hi = np.inf
    mid = 1.0
    for _ in range(n_iter):
        total = _membership_sum(distances, rho, mid)
        if abs(total - target) <= tol:
            break
        if total > target:
            hi = mid
            mid = (lo + hi) / 2.0
        else:
            lo = mid
            if hi == np.inf:
                mid *= 2.0
            else:
                mid = (lo + hi) / 2.0
    return max(mid, floor)


def solve_sigma(distances, rho: float, target: float) -> float:
    """Bandwidth with ``sum_j exp(-max(0, d_j - rho) / sigma) == target``.

    Bisection stops at residual 1e-5 or 64 steps. The result never drops
    below ``1e-3 * mean(distances)``. Targets at or under the number of
    distances equal to ``rho`` are unreachable and return that floor directly.
    """
    d = np.asarray(distances, dtype=np.float64)
    return float(_solve_sigma(d, float(rho), float(target), SIGMA_TOL, SIGMA_ITERS, SIGMA_FLOOR_SCALE))


@numba.njit(cache=True)
def _sigmas(indptr, distances, rho, tol, n_iter, floor_scale):
    n = indptr.size - 1
    sigma = np.ones(n)
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        if hi > lo:
            sigma[i] = _solve_sigma(distances[lo:hi], rho[i], np.log2(hi - lo), tol, n_iter, floor_scale)
    return sigma


def smoothing_params(neigh: LocalNeighborhoods) -> SmoothingParams:
    rho = compute_rho(neigh)
    sigma = _sigmas(neigh.indptr, neigh.distances, rho, SIGMA_TOL, SIGMA_ITERS, SIGMA_FLOOR_SCALE)
    return SmoothingParams(rho, sigma)


def membership_strengths(neigh: LocalNeighborhoods, params: SmoothingParams) -> sp.coo_matrix:
    """Directed strengths ``exp(-max(0, d - rho_i) / sigma_i)``; underflowed zeros dropped."""
    n = neigh.n_points
    rows = np.repeat(np.arange(n), neigh.sizes())
    gap = np.maximum(neigh.distances - params.rho[rows], 0.0)
    w = np.exp(-gap / params.sigma[rows])
    keep = w > 0
    return sp.coo_matrix((w[keep], (rows[keep], neigh.indices[keep])), shape=(n, n))


def fuzzy_union(directed) -> FuzzyGraph:
    """Probabilistic t-conorm ``a + b - a*b`` of the directed strengths."""
    P = sp.csr_matrix(directed, dtype=np.float64)
    P.sum_duplicates()
    Pt = P.T.tocsr()
    union = (P + Pt - P.multiply(Pt)).tocoo()
    # mirror the upper triangle so both directions hold the same float
    upper = union.row < union.col
    r, c, v = union.row[upper], union.col[upper], union.data[upper]
    keep = v > 0
    r, c, v = r[keep], c[keep], v[keep]
    n = P.shape[0]
    sym = sp.csr_matrix(
        (np.concatenate([v, v]), (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(n, n)
    )
    sym.sort_indices()
    return FuzzyGraph(sym)


def fuzzy_simplicial_set(neigh: LocalNeighborhoods) -> FuzzyGraph:
    return fuzzy_union(membership_strengths(neigh, smoothing_params(neigh)))
