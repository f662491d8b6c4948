"""Method variants (default UMAP and mutual k-NN repairs) and grid search."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import connectivity, evaluation, layout
from .fuzzy import FuzzyGraph, fuzzy_simplicial_set
from .io import FeatureMatrix
from .knn import NeighborGraph, WeightedGraph, exact_knn, mutual_knn
from .neighborhood import LocalNeighborhoods, adjacent_neighbors, path_neighbors

log = logging.getLogger(__name__)

DEFAULT_K_GRID = tuple(range(10, 51, 5))
DEFAULT_MIN_DIST_GRID = tuple(round(0.1 * i, 1) for i in range(11))
DEFAULT_SEEDS = (0, 1, 2, 3, 4)
WORKERS_ENV = "UMAP_MNN_WORKERS"

VARIANT_REPAIR = {"umap": "none", "nn": "nn", "mst-min": "mst_min", "mst-all": "mst_all"}


@dataclass(frozen=True)
class MethodConfig:
    graph_mode: str = "default_knn"
    repair: str = "none"
    neighborhood: str = "adjacent"
    k: int = 15
    k_new: Optional[int] = None
    min_dist: float = 0.1
    dim: int = 2
    metric: str = "euclidean"
    n_epochs: Optional[int] = None
    seeds: tuple = DEFAULT_SEEDS
    neg_rate: int = 5
    lr0: float = 1.0

    def __post_init__(self):
        if self.graph_mode not in ("default_knn", "mutual"):
            raise ValueError(f"unknown graph_mode {self.graph_mode!r}")
        if self.repair not in connectivity.REPAIRS:
            raise ValueError(f"unknown repair {self.repair!r}")
        if self.neighborhood not in ("adjacent", "path"):
            raise ValueError(f"unknown neighborhood {self.neighborhood!r}")
        if (self.repair == "none") != (self.graph_mode == "default_knn"):
            raise ValueError("repair 'none' goes with the default k-NN graph and only with it")
        if self.neighborhood == "path" and self.graph_mode != "mutual":
            raise ValueError("path neighbours require a repaired mutual k-NN graph")
        if self.k < 1 or self.dim < 1:
            raise ValueError("k and dim must be positive")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @classmethod
    def variant(cls, name: str, neighborhood: str = "adjacent", **kw) -> "MethodConfig":
        """Build from a CLI-style name: ``umap``, ``nn``, ``mst-min`` or ``mst-all``."""
        if name not in VARIANT_REPAIR:
            raise ValueError(f"unknown variant {name!r}; expected one of {sorted(VARIANT_REPAIR)}")
        mode = "default_knn" if name == "umap" else "mutual"
        return cls(graph_mode=mode, repair=VARIANT_REPAIR[name], neighborhood=neighborhood, **kw)

    @property
    def effective_k_new(self) -> int:
        return self.k if self.k_new is None else self.k_new

    @property
    def tag(self) -> str:
        if self.graph_mode == "default_knn":
            return "umap"
        return f"{self.repair.replace('_', '-')}+{self.neighborhood}"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["seeds"] = list(self.seeds)
        return out


def table_variants(**kw) -> list[MethodConfig]:
    """The seven compared methods: UMAP and {NN, MST-min, MST-all} x {adjacent, path}."""
    out = [MethodConfig.variant("umap", **kw)]
    for hood in ("adjacent", "path"):
        for name in ("nn", "mst-min", "mst-all"):
            out.append(MethodConfig.variant(name, hood, **kw))
    return out


@dataclass
class GraphStages:
    knn: NeighborGraph
    mknn: Optional[WeightedGraph]
    g_prime: Optional[WeightedGraph]
    neighborhoods: LocalNeighborhoods
    fuzzy: FuzzyGraph


def build_graph(knn: NeighborGraph, cfg: MethodConfig) -> GraphStages:
    """Seed-independent graph stages for ``cfg``; ``knn`` may hold more than k columns."""
    if knn.k > cfg.k:
        knn = knn.truncate(cfg.k)
    elif knn.k < cfg.k:
        raise ValueError(f"k-NN graph has {knn.k} columns, config needs {cfg.k}")
    if cfg.graph_mode == "default_knn":
        hoods = LocalNeighborhoods.from_knn(knn)
        return GraphStages(knn, None, None, hoods, fuzzy_simplicial_set(hoods))
    mknn = mutual_knn(knn)
    g_prime = connectivity.repair(mknn, knn, cfg.repair)
    if cfg.neighborhood == "path":
        hoods = path_neighbors(g_prime, cfg.effective_k_new)
    else:
        hoods = adjacent_neighbors(g_prime)
    return GraphStages(knn, mknn, g_prime, hoods, fuzzy_simplicial_set(hoods))


def _workers(n_workers):
    if n_workers is None:
        n_workers = int(os.environ.get(WORKERS_ENV, "1"))
    return max(1, n_workers)


def embed_graph(fg: FuzzyGraph, cfg: MethodConfig, seeds: Sequence[int] = None,
                n_workers: int = None) -> list[layout.Embedding]:
    """Spectral init once, then one SGD run per seed."""
    seeds = cfg.seeds if seeds is None else tuple(seeds)
    base = layout.spectral_coordinates(fg, cfg.dim)
    curve = layout.fit_ab(cfg.min_dist)
    n_epochs = cfg.n_epochs if cfg.n_epochs is not None else layout.default_epochs(fg.n_vertices)
    hyper = {
        "method": cfg.tag, "k": cfg.k, "k_new": cfg.effective_k_new, "min_dist": cfg.min_dist,
        "n_epochs": n_epochs, "metric": cfg.metric, "dim": cfg.dim,
    }

    def one(seed):
        init = layout.Embedding(layout.jitter(base, fg.n_vertices, cfg.dim, seed), seed, dict(hyper), cfg.dim)
        emb = layout.optimize_layout(init, fg, curve, n_epochs, cfg.neg_rate, cfg.lr0, seed)
        emb.hyperparams.update(hyper)
        return emb

    workers = _workers(n_workers)
    if workers == 1 or len(seeds) == 1:
        return [one(s) for s in seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, seeds))


def run_variant(data: FeatureMatrix, cfg: MethodConfig, knn: NeighborGraph = None,
                n_workers: int = None) -> list[layout.Embedding]:
    """Embed ``data`` once per seed in ``cfg.seeds``."""
    if knn is None:
        knn = exact_knn(data, cfg.k, cfg.metric)
    stages = build_graph(knn, cfg)
    return embed_graph(stages.fuzzy, cfg, n_workers=n_workers)


@dataclass
class GridResult:
    best: MethodConfig
    report: evaluation.MetricReport
    cells: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "report": self.report.to_dict(),
            "cells": {key: rep.to_dict() for key, rep in self.cells.items()},
        }


def cell_key(k: int, min_dist: float) -> str:
    return f"k={k},min_dist={min_dist:g}"


def grid_search(data: FeatureMatrix, labels, base: MethodConfig,
                k_values: Sequence[int] = DEFAULT_K_GRID,
                min_dist_values: Sequence[float] = DEFAULT_MIN_DIST_GRID,
                seeds: Sequence[int] = None, completed: dict = None,
                on_cell: Callable[[str, evaluation.MetricReport], None] = None,
                n_init: int = 10, n_workers: int = None) -> GridResult:
    """Score every (k, min_dist) cell by seed-averaged NMI and return the best.

    The k-NN graph is computed once at the largest k; each k's graph stages
    are shared by all of its min_dist cells. Cells present in ``completed``
    (key -> MetricReport) are reused rather than recomputed. Ties go to the
    smaller k, then the smaller min_dist.
    """
    if not k_values or not min_dist_values:
        raise ValueError("grids must be non-empty")
    seeds = tuple(base.seeds if seeds is None else seeds)
    cells = dict(completed or {})
    k_values = sorted(set(int(k) for k in k_values))
    min_dist_values = sorted(set(float(m) for m in min_dist_values))
    knn = None
    for k in k_values:
        todo = [m for m in min_dist_values if cell_key(k, m) not in cells]
        if not todo:
            continue
        if knn is None:
            knn = exact_knn(data, max(k_values), base.metric)
        stages = build_graph(knn, replace(base, k=k, seeds=seeds))
        for m in todo:
            cfg = replace(base, k=k, min_dist=m, seeds=seeds)
            embs = embed_graph(stages.fuzzy, cfg, n_workers=n_workers)
            report = evaluation.evaluate_embeddings(embs, labels, n_init=n_init)
            key = cell_key(k, m)
            cells[key] = report
            log.info("%s %s: NMI %.4f +- %.4f", cfg.tag, key, report.mean(), report.std())
            if on_cell is not None:
                on_cell(key, report)
    best_cfg, best_rep, best_score = None, None, -np.inf
    for k in k_values:
        for m in min_dist_values:
            rep = cells[cell_key(k, m)]
            if rep.mean("nmi") > best_score:
                best_cfg, best_rep, best_score = replace(base, k=k, min_dist=m, seeds=seeds), rep, rep.mean("nmi")
    return GridResult(best_cfg, best_rep, cells)
