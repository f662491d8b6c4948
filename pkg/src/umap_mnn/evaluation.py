"""KMeans clustering and partition-agreement metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import betainc

METRIC_NAMES = ("nmi", "accuracy", "purity", "ari")


@dataclass(frozen=True)
class Partition:
    assignments: np.ndarray
    n_clusters: int
    inertia: float = float("nan")
    history: tuple = ()


def _as_labels(x):
    if hasattr(x, "labels"):
        x = x.labels
    elif hasattr(x, "assignments"):
        x = x.assignments
    return np.asarray(x, dtype=np.int64)


def _coords(emb):
    return np.asarray(getattr(emb, "coords", emb), dtype=np.float64)


def _kmeans_pp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = ((X - centers[0]) ** 2).sum(axis=1)
    n_trials = 2 + int(np.log(k))
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[c] = X[rng.integers(n)]
            continue
        cand = np.searchsorted(np.cumsum(closest), rng.random(n_trials) * total)
        cand = np.minimum(cand, n - 1)
        d = ((X[None, :, :] - X[cand][:, None, :]) ** 2).sum(axis=2)
        pot = np.minimum(closest[None, :], d).sum(axis=1)
        best = int(np.argmin(pot))
        centers[c] = X[cand[best]]
        closest = np.minimum(closest, d[best])
    return centers


def _sq_dists(X, centers):
    return (
        (X * X).sum(axis=1)[:, None]
        - 2.0 * X @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    ).clip(min=0.0)


def lloyd(X, centers, max_iter=300):
    """Lloyd iterations to an assignment fixpoint; returns (labels, centers, inertia history)."""
    k = centers.shape[0]
    labels = None
    history = []
    for _ in range(max_iter):
        d = _sq_dists(X, centers)
        new = np.argmin(d, axis=1)
        # empty clusters take the point farthest from its current centre
        counts = np.bincount(new, minlength=k)
        if np.any(counts == 0):
            far = d[np.arange(X.shape[0]), new]
            for c in np.flatnonzero(counts == 0):
                movable = counts[new] > 1
                p = int(np.argmax(np.where(movable, far, -1.0)))
                counts[new[p]] -= 1
                new[p] = c
                counts[c] = 1
                far[p] = -1.0
        history.append(float(((X - centers[new]) ** 2).sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([X[labels == c].mean(axis=0) for c in range(k)])
    inertia = float(((X - centers[labels]) ** 2).sum())
    history.append(inertia)
    return labels, centers, history


def kmeans(emb, k: int, seed: int = 0, n_init: int = 10, max_iter: int = 300) -> Partition:
    """Best-inertia KMeans over ``n_init`` k-means++ restarts."""
    X = _coords(emb)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must satisfy 1 <= k <= n_points ({n}), got {k}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers = _kmeans_pp(X, k, rng)
        labels, _, history = lloyd(X, centers, max_iter)
        if best is None or history[-1] < best.inertia:
            best = Partition(labels, k, history[-1], tuple(history))
    return best


def contingency(truth, pred) -> np.ndarray:
    truth, pred = _as_labels(truth), _as_labels(pred)
    if truth.shape != pred.shape:
        raise ValueError(f"length mismatch: {truth.size} vs {pred.size}")
    _, t = np.unique(truth, return_inverse=True)
    _, p = np.unique(pred, return_inverse=True)
    table = np.zeros((t.max(initial=-1) + 1, p.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (t, p), 1)
    return table


def _entropy(counts):
    counts = counts[counts > 0].astype(np.float64)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(truth, pred) -> float:
    """Mutual information over the arithmetic mean of the two entropies; 0/0 gives 0."""
    table = contingency(truth, pred)
    n = table.sum()
    if n == 0:
        return 0.0
    nz = table > 0
    pij = table[nz] / n
    pi = table.sum(axis=1) / n
    pj = table.sum(axis=0) / n
    outer = np.outer(pi, pj)[nz]
    mi = float((pij * np.log(pij / outer)).sum())
    denom = 0.5 * (_entropy(table.sum(axis=1)) + _entropy(table.sum(axis=0)))
    if denom <= 0:
        return 0.0
    return float(min(1.0, max(0.0, mi / denom)))


def clustering_accuracy(truth, pred) -> float:
    """Fraction correct under the best one-to-one cluster-to-class mapping."""
    table = contingency(truth, pred)
    if table.size == 0:
        return 0.0
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / table.sum())


def purity(truth, pred) -> float:
    table = contingency(truth, pred)
    if table.size == 0:
        return 0.0
    return float(table.max(axis=0).sum() / table.sum())


def ari(truth, pred) -> float:
    table = contingency(truth, pred)
    n = table.sum()
    comb = lambda x: x * (x - 1) / 2.0
    sum_ij = comb(table.astype(np.float64)).sum()
    sum_a = comb(table.sum(axis=1).astype(np.float64)).sum()
    sum_b = comb(table.sum(axis=0).astype(np.float64)).sum()
    total = comb(float(n))
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def score_all(truth, pred) -> dict:
    return {
        "nmi": nmi(truth, pred),
        "accuracy": clustering_accuracy(truth, pred),
        "purity": purity(truth, pred),
        "ari": ari(truth, pred),
    }


def per_class_variance(emb, truth) -> np.ndarray:
    """Unbiased per-dimension variance within each class; NaN for singleton classes."""
    X = _coords(emb)
    y = _as_labels(truth)
    n_classes = int(y.max()) + 1 if y.size else 0
    out = np.full((n_classes, X.shape[1]), np.nan)
    for c in range(n_classes):
        members = X[y == c]
        if members.shape[0] >= 2:
            out[c] = members.var(axis=0, ddof=1)
    return out


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    pvalue: float
    df: float
    degenerate: bool = False


def welch_t_test(sample_a, sample_b) -> TTestResult:
    """Two-tailed Welch t-test with Welch-Satterthwaite degrees of freedom.

    Two zero-variance samples with different means give ``t = +-inf``,
    ``p = 0`` and ``degenerate=True``; identical constant samples give
    ``t = 0``, ``p = 1``.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least two values")
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    diff = a.mean() - b.mean()
    se2 = va + vb
    if se2 == 0:
        if diff == 0:
            return TTestResult(0.0, 1.0, float("nan"), degenerate=True)
        return TTestResult(math.copysign(math.inf, diff), 0.0, float("nan"), degenerate=True)
    t = diff / math.sqrt(se2)
    df = se2 ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(float(t), min(1.0, p), float(df))


@dataclass
class MetricReport:
    per_seed: dict = field(default_factory=lambda: {m: [] for m in METRIC_NAMES})
    seeds: list = field(default_factory=list)

    def add(self, seed, scores: dict):
        self.seeds.append(seed)
        for m in METRIC_NAMES:
            self.per_seed[m].append(float(scores[m]))

    def mean(self, metric="nmi") -> float:
        return float(np.mean(self.per_seed[metric]))

    def std(self, metric="nmi") -> float:
        values = self.per_seed[metric]
        return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0

    def to_dict(self) -> dict:
        out = {"seeds": list(self.seeds), "per_seed": {m: list(v) for m, v in self.per_seed.items()}}
        for m in METRIC_NAMES:
            if self.per_seed[m]:
                out[m] = {"mean": self.mean(m), "std": self.std(m)}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        rep = cls()
        rep.seeds = list(data.get("seeds", []))
        for m in METRIC_NAMES:
            rep.per_seed[m] = list(data.get("per_seed", {}).get(m, []))
        return rep


def evaluate_embeddings(embeddings, truth, n_init: int = 10) -> MetricReport:
    """KMeans with k = number of ground-truth classes for each embedding."""
    y = _as_labels(truth)
    k = int(np.unique(y).size)
    report = MetricReport()
    for i, emb in enumerate(embeddings):
        seed = getattr(emb, "seed", None)
        seed = i if seed is None else seed
        part = kmeans(emb, k, seed=seed, n_init=n_init)
        report.add(seed, score_all(y, part))
    return report
