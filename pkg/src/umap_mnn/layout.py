"""Spectral initialisation and SGD layout of a fuzzy graph."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
import scipy.sparse as sp
from scipy.optimize import least_squares
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .exceptions import NumericalError
from .fuzzy import FuzzyGraph

log = logging.getLogger(__name__)

MAX_COORD = 10.0
INIT_NOISE = 1e-4
DENSE_EIG_LIMIT = 2000
EIG_TOL = 1e-8
EIG_MAXITER = 1000
GRAD_CLIP = 4.0
DIST_EPS = 1e-3


@dataclass
class Embedding:
    coords: np.ndarray
    seed: Optional[int] = None
    hyperparams: dict = field(default_factory=dict)
    dim: Optional[int] = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 2:
            if self.coords.size == 0 and self.dim:
                self.coords = self.coords.reshape(0, self.dim)
            else:
                raise ValueError("embedding coordinates must be a 2-D array")
        if self.dim is None:
            self.dim = self.coords.shape[1]
        if self.dim < 1 or self.coords.shape[1] != self.dim:
            raise ValueError(f"embedding dim {self.dim} does not match coords {self.coords.shape}")
        if not np.all(np.isfinite(self.coords)):
            raise ValueError("embedding coordinates must be finite")

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    def with_coords(self, coords) -> "Embedding":
        return Embedding(coords, self.seed, dict(self.hyperparams), self.dim)


@dataclass(frozen=True)
class CurveParams:
    a: float
    b: float
    min_dist: float

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        return 1.0 / (1.0 + self.a * t ** (2.0 * self.b))


def target_curve(t, min_dist):
    t = np.asarray(t, dtype=np.float64)
    return np.where(t <= min_dist, 1.0, np.exp(-(t - min_dist)))


def fit_ab(min_dist: float, seed: int = 0, n_starts: int = 8) -> CurveParams:
    """Least-squares fit of ``1 / (1 + a t^(2b))`` to the min_dist target curve.

    Sampled at 300 points on [0, 3]. Levenberg-Marquardt from several seeded
    starting points in log-parameter space; the best residual wins.
    """
    if not 0.0 <= min_dist <= 1.0:
        raise ValueError("min_dist must lie in [0, 1]")
    t = np.linspace(0.0, 3.0, 300)
    y = target_curve(t, min_dist)

    def resid(p):
        a, b = np.exp(p)
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + a * t ** (2.0 * b)) - y

    rng = np.random.default_rng(seed)
    starts = [np.zeros(2)] + [rng.uniform([-3.0, -1.0], [2.0, 1.0]) for _ in range(n_starts - 1)]
    best = None
    for p0 in starts:
        fit = least_squares(resid, p0, method="lm", xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=500)
        if best is None or fit.cost < best.cost:
            best = fit
    a, b = np.exp(best.x)
    return CurveParams(float(a), float(b), float(min_dist))


def _normalized_laplacian(W: sp.spmatrix) -> sp.csr_matrix:
    W = sp.csr_matrix(W, dtype=np.float64)
    deg = np.asarray(W.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    D = sp.diags(inv_sqrt)
    return (sp.identity(W.shape[0], format="csr") - D @ W @ D).tocsr()


def _fix_signs(vecs):
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def spectral_vectors(W, d: int, method: str = "auto"):
    """Eigenpairs of the normalized Laplacian of a connected weighted graph.

    Returns the ``d`` smallest non-trivial eigenvalues and their unit
    eigenvectors (columns), signs fixed so each column's largest-magnitude
    entry is positive. ``method`` is ``dense``, ``iterative`` or ``auto``.
    """
    L = _normalized_laplacian(W)
    m = L.shape[0]
    n_vec = min(d, m - 1)
    if n_vec <= 0:
        return np.zeros(0), np.zeros((m, 0))
    if method == "auto":
        method = "dense" if m < DENSE_EIG_LIMIT or d + 1 >= m else "iterative"
    if method == "dense":
        vals, vecs = np.linalg.eigh(L.toarray())
        return vals[1 : n_vec + 1], _fix_signs(vecs[:, 1 : n_vec + 1])
    # largest eigenvalues of 2I - L are the smallest of L; spectrum stays in [0, 2]
    shifted = (2.0 * sp.identity(m, format="csr") - L).tocsr()
    v0 = np.random.default_rng(0).uniform(0.5, 1.5, m)
    vals, vecs = eigsh(shifted, k=n_vec + 1, which="LA", tol=EIG_TOL, maxiter=EIG_MAXITER * m, v0=v0)
    order = np.argsort(-vals)
    vals = 2.0 - vals[order]
    vecs = vecs[:, order]
    return vals[1:], _fix_signs(vecs[:, 1:])


def spectral_coordinates(fg: FuzzyGraph, d: int, method: str = "auto"):
    """Noise-free spectral layout scaled to max |coordinate| = 10.

    One block per connected component, ordered by decreasing size. Each block
    holds that component's own eigenvectors scaled to unit half-width and is
    shifted along the first axis by ``rank * 10 * 2`` (ten block widths).
    Returns ``None`` when the eigensolver fails to converge.
    """
    n = fg.n_vertices
    if n < d + 1:
        raise ValueError(f"spectral init needs at least d+1={d + 1} vertices, got {n}")
    W = fg.matrix
    n_comp, labels = connected_components(W, directed=False)
    sizes = np.bincount(labels, minlength=n_comp)
    order = sorted(range(n_comp), key=lambda c: -sizes[c])
    coords = np.zeros((n, d))
    try:
        for rank, c in enumerate(order):
            members = np.flatnonzero(labels == c)
            block = np.zeros((members.size, d))
            if members.size > 1:
                _, vecs = spectral_vectors(W[members][:, members], d, method)
                block[:, : vecs.shape[1]] = vecs
                half_width = np.abs(block).max()
                if half_width > 0:
                    block /= half_width
            block[:, 0] += rank * 10.0 * 2.0
            coords[members] = block
    except (ArpackNoConvergence, np.linalg.LinAlgError) as exc:
        log.warning("spectral initialisation failed (%s); falling back to random init", exc)
        return None
    if n_comp > 1:
        log.info("fuzzy graph has %d components; spectral blocks laid out side by side", n_comp)
        coords -= coords.mean(axis=0)
    scale = np.abs(coords).max()
    if scale > 0:
        coords *= MAX_COORD / scale
    return coords


def jitter(coords, n_points: int, d: int, seed: int) -> np.ndarray:
    """Add seeded N(0, 1e-4) noise, or draw uniform [-10, 10] when ``coords`` is None."""
    rng = np.random.default_rng(seed)
    if coords is None:
        return rng.uniform(-MAX_COORD, MAX_COORD, size=(n_points, d))
    return coords + rng.normal(scale=INIT_NOISE, size=coords.shape)


def spectral_init(fg: FuzzyGraph, d: int, seed: int = 0, method: str = "auto") -> Embedding:
    """Spectral coordinates of ``fg`` plus seeded tie-breaking noise."""
    coords = spectral_coordinates(fg, d, method)
    return Embedding(jitter(coords, fg.n_vertices, d, seed), seed=seed, dim=d)


@numba.njit(cache=True)
def attractive_coeff(dist_sq, a, b):
    """Factor ``c`` with ``grad_{y_i} log f(|y_i - y_j|) = c * (y_i - y_j)``."""
    if dist_sq <= 0.0:
        return 0.0
    return -2.0 * a * b * dist_sq ** (b - 1.0) / (a * dist_sq ** b + 1.0)


@numba.njit(cache=True)
def repulsive_coeff(dist_sq, a, b, eps):
    """Factor for ``grad_{y_i} log(1 - f)``; ``eps`` guards the 1/d^2 pole."""
    if dist_sq <= 0.0:
        return 0.0
    return 2.0 * b / ((eps + dist_sq) * (a * dist_sq ** b + 1.0))


@numba.njit(cache=True)
def _clip(v):
    if v > GRAD_CLIP:
        return GRAD_CLIP
    if v < -GRAD_CLIP:
        return -GRAD_CLIP
    return v


@numba.njit(cache=True)
def _next_rand(state):
    # xorshift64*; state is a 1-element uint64 array
    x = state[0]
    x ^= x >> numba.uint64(12)
    x ^= x << numba.uint64(25)
    x ^= x >> numba.uint64(27)
    state[0] = x
    return x * numba.uint64(0x2545F4914F6CDD1D)


@numba.njit(cache=True, nogil=True)
def _sgd(Y, head, tail, epochs_per_sample, a, b, n_epochs, neg_rate, lr0, state):
    n, dim = Y.shape
    n_edges = head.size
    next_sample = epochs_per_sample.copy()
    for epoch in range(n_epochs):
        alpha = lr0 * (1.0 - epoch / n_epochs)
        for e in range(n_edges):
            if next_sample[e] > epoch:
                continue
            i = head[e]
            j = tail[e]
            d2 = 0.0
            for c in range(dim):
                diff = Y[i, c] - Y[j, c]
                d2 += diff * diff
            coeff = attractive_coeff(d2, a, b)
            for c in range(dim):
                g = _clip(coeff * (Y[i, c] - Y[j, c])) * alpha
                Y[i, c] += g
                Y[j, c] -= g
            next_sample[e] += epochs_per_sample[e]
            for _ in range(neg_rate):
                k = np.int64(_next_rand(state) % numba.uint64(n))
                if k == i:
                    continue
                d2 = 0.0
                for c in range(dim):
                    diff = Y[i, c] - Y[k, c]
                    d2 += diff * diff
                coeff = repulsive_coeff(d2, a, b, DIST_EPS)
                if coeff > 0.0:
                    for c in range(dim):
                        Y[i, c] += _clip(coeff * (Y[i, c] - Y[k, c])) * alpha
        for r in range(n):
            for c in range(dim):
                if not np.isfinite(Y[r, c]):
                    return epoch
    return -1


def default_epochs(n_points: int) -> int:
    return 200 if n_points > 10000 else 500


def _edge_schedule(fg: FuzzyGraph, n_epochs: int):
    coo = fg.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    head, tail, w = coo.row[order].astype(np.int64), coo.col[order].astype(np.int64), coo.data[order]
    if w.size == 0:
        return head, tail, w
    keep = w >= w.max() / max(n_epochs, 1)
    head, tail, w = head[keep], tail[keep], w[keep]
    return head, tail, w.max() / w


def optimize_layout(init: Embedding, fg: FuzzyGraph, curve: CurveParams, n_epochs: int = None,
                    neg_rate: int = 5, lr0: float = 1.0, seed: int = 0) -> Embedding:
    """Edge-sampled SGD of the fuzzy cross-entropy.

    Edge (i, j, w) is sampled on average once every ``w_max / w`` epochs and
    pulls both endpoints together; each sample is followed by ``neg_rate``
    uniformly drawn vertices that push ``i`` away. The learning rate decays
    linearly to zero. Fully sequential, so a fixed seed reproduces the output
    bit for bit.
    """
    if init.n_points != fg.n_vertices:
        raise ValueError("embedding and fuzzy graph sizes differ")
    if n_epochs is None:
        n_epochs = default_epochs(fg.n_vertices)
    Y = np.array(init.coords, dtype=np.float64, copy=True)
    params = dict(init.hyperparams)
    params.update(min_dist=curve.min_dist, n_epochs=int(n_epochs), neg_rate=int(neg_rate), lr0=float(lr0))
    if n_epochs <= 0 or fg.n_vertices == 0:
        return Embedding(Y, seed=seed, hyperparams=params, dim=init.dim)
    head, tail, eps = _edge_schedule(fg, n_epochs)
    seeds = np.random.default_rng(seed).integers(1, 2**63 - 1, size=1, dtype=np.int64)
    state = seeds.astype(np.uint64)
    bad = _sgd(Y, head, tail, eps, curve.a, curve.b, int(n_epochs), int(neg_rate), float(lr0), state)
    if bad >= 0:
        raise NumericalError(f"non-finite coordinates after epoch {bad}")
    return Embedding(Y, seed=seed, hyperparams=params, dim=init.dim)


def sampled_cross_entropy(emb: Embedding, fg: FuzzyGraph, curve: CurveParams,
                          neg_rate: int = 5, seed: int = 0) -> float:
    """Monte-Carlo estimate of the layout objective (lower is better)."""
    coo = fg.matrix.tocoo()
    Y = emb.coords
    d = np.linalg.norm(Y[coo.row] - Y[coo.col], axis=1)
    attract = -(coo.data * np.log(np.maximum(curve(d), 1e-300))).sum()
    rng = np.random.default_rng(seed)
    src = np.repeat(coo.row, neg_rate)
    other = rng.integers(0, fg.n_vertices, size=src.size)
    dn = np.linalg.norm(Y[src] - Y[other], axis=1)
    repulse = -np.log(np.maximum(1.0 - curve(dn), 1e-4)).sum()
    return float((attract + repulse) / max(coo.nnz, 1))
