import numpy as np
import pytest

from umap_mnn.fuzzy import FuzzyGraph
from umap_mnn.knn import WeightedGraph

import scipy.sparse as sp


def random_weighted_graph(n, p, rng, connected=False):
    """Erdos-Renyi graph with uniform (0.1, 5) weights; optionally chained to be connected."""
    u, v = np.triu_indices(n, 1)
    keep = rng.random(u.size) < p
    u, v = u[keep], v[keep]
    if connected:
        perm = rng.permutation(n)
        u = np.concatenate([u, perm[:-1]])
        v = np.concatenate([v, perm[1:]])
    w = rng.uniform(0.1, 5.0, size=u.size)
    return WeightedGraph.from_edges(n, u, v, w)


def fuzzy_from_edges(n, edges):
    rows = [a for a, b, _ in edges] + [b for a, b, _ in edges]
    cols = [b for a, b, _ in edges] + [a for a, b, _ in edges]
    vals = [w for *_, w in edges] * 2
    return FuzzyGraph(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))


def gaussian_blobs(n_per, n_blobs, dim, rng, spread=10.0):
    centers = rng.normal(scale=spread, size=(n_blobs, dim))
    y = np.repeat(np.arange(n_blobs), n_per)
    return centers[y] + rng.normal(size=(y.size, dim)), y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
