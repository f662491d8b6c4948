"""Connectivity repair for mutual k-NN graphs: NN, MST-min and MST-all."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components as _cc

from .knn import NeighborGraph, WeightedGraph

log = logging.getLogger(__name__)

REPAIRS = ("none", "nn", "mst_min", "mst_all")


@dataclass(frozen=True)
class ComponentLabeling:
    component_id: np.ndarray
    n_components: int
    component_sizes: np.ndarray

    def giant(self) -> int:
        """Id of the largest component (lowest id on ties)."""
        return int(np.argmax(self.component_sizes))

    def outside_giant(self) -> int:
        """Number of vertices not in the largest component."""
        if self.n_components == 0:
            return 0
        return int(self.component_sizes.sum() - self.component_sizes.max())


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


def connected_components(g: WeightedGraph) -> ComponentLabeling:
    """Component ids are assigned in order of each component's smallest vertex."""
    n, labels = _cc(g.structure(), directed=False)
    return ComponentLabeling(labels.astype(np.int64), int(n), np.bincount(labels, minlength=n))


def _sorted_edges(g: WeightedGraph):
    u, v, w = g.edges()
    order = np.lexsort((v, u, w))
    return u[order], v[order], w[order]


def connect_nn(mknn: WeightedGraph, knn: NeighborGraph) -> WeightedGraph:
    """Link every isolated vertex to its first k-NN neighbour."""
    isolated = np.flatnonzero(mknn.degree() == 0)
    if isolated.size == 0:
        return mknn
    u, v, w = mknn.edges()
    return WeightedGraph.from_edges(
        mknn.n_vertices,
        np.concatenate([u, isolated]),
        np.concatenate([v, knn.indices[isolated, 0]]),
        np.concatenate([w, knn.distances[isolated, 0]]),
    )


def minimum_spanning_forest(graph) -> WeightedGraph:
    """Kruskal minimum spanning forest of the symmetrized k-NN graph.

    Accepts a :class:`NeighborGraph` (symmetrized first) or a
    :class:`WeightedGraph`. Equal weights are ordered by (min end, max end).
    """
    if isinstance(graph, NeighborGraph):
        graph = graph.symmetrized()
    u, v, w = _sorted_edges(graph)
    uf = UnionFind(graph.n_vertices)
    keep = np.zeros(u.size, dtype=bool)
    n_kept, target = 0, graph.n_vertices - 1
    for e, (a, b) in enumerate(zip(u.tolist(), v.tolist())):
        if uf.union(a, b):
            keep[e] = True
            n_kept += 1
            if n_kept == target:
                break
    return WeightedGraph.from_edges(graph.n_vertices, u[keep], v[keep], w[keep])


def connect_mst_min(mknn: WeightedGraph, mst: WeightedGraph) -> WeightedGraph:
    """Add only the MST edges that join two components, lightest first."""
    uf = UnionFind(mknn.n_vertices)
    mu, mv, _ = mknn.edges()
    for a, b in zip(mu.tolist(), mv.tolist()):
        uf.union(a, b)
    u, v, w = _sorted_edges(mst)
    add = np.array([uf.union(a, b) for a, b in zip(u.tolist(), v.tolist())], dtype=bool)
    if not add.any():
        return mknn
    _, _, mw = mknn.edges()
    return WeightedGraph.from_edges(
        mknn.n_vertices,
        np.concatenate([mu, u[add]]),
        np.concatenate([mv, v[add]]),
        np.concatenate([mw, w[add]]),
    )


def connect_mst_all(mknn: WeightedGraph, mst: WeightedGraph) -> WeightedGraph:
    return mknn.union(mst)


def repair(mknn: WeightedGraph, knn: NeighborGraph, method: str) -> WeightedGraph:
    """Dispatch to one of the repair strategies (``none`` returns ``mknn``)."""
    if method == "none":
        return mknn
    if method == "nn":
        return connect_nn(mknn, knn)
    if method not in ("mst_min", "mst_all"):
        raise ValueError(f"unknown repair {method!r}; expected one of {REPAIRS}")
    mst = minimum_spanning_forest(knn)
    if mst.n_edges < mst.n_vertices - 1:
        log.warning(
            "k-NN graph is disconnected (%d components); repaired graph stays disconnected",
            mst.n_vertices - mst.n_edges,
        )
    if method == "mst_min":
        return connect_mst_min(mknn, mst)
    return connect_mst_all(mknn, mst)
