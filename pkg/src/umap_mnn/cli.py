"""Command-line entry point: ``umap-mnn {embed,eval,grid,plot}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation, io, plotting
from .exceptions import DataError, NumericalError
from .knn import METRICS, exact_knn
from .pipeline import (
    DEFAULT_K_GRID,
    DEFAULT_MIN_DIST_GRID,
    MethodConfig,
    build_graph,
    cell_key,
    embed_graph,
    grid_search,
)

log = logging.getLogger("umap_mnn")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(ValueError):
    pass


def parse_seeds(text: str) -> tuple:
    """``0..4`` (inclusive range) or ``0,3,7``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            seeds = tuple(range(int(lo), int(hi) + 1))
        else:
            seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise UsageError(f"cannot parse seeds {text!r}; use '0..4' or '0,1,2'") from None
    if not seeds:
        raise UsageError("no seeds given")
    return seeds


def parse_range(text: str, cast=float) -> tuple:
    """``start:stop:step`` with an inclusive stop, or a single value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return (cast(parts[0]),)
        if len(parts) != 3:
            raise ValueError
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(cast(round(start + i * step, 10)) for i in range(count))
    except ValueError:
        raise UsageError(f"cannot parse range {text!r}; use 'start:stop:step'") from None


def load_labels_any(path):
    """IDX label file (detected by magic) or one integer per line."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head[:2] == b"\x1f\x8b" or head == io.IDX_LABELS_MAGIC.to_bytes(4, "big"):
        labels = io._read_idx(path, io.IDX_LABELS_MAGIC, 1)
        return io.LabelVector(labels.astype(np.int64))
    return io.load_labels(path)


def load_dataset(args):
    if args.format == "idx":
        return io.load_idx(args.data, args.labels)
    return io.load_sparse_matrix(args.data, args.labels)


def _config_from_args(args, **extra) -> MethodConfig:
    try:
        return MethodConfig.variant(
            args.variant,
            args.neighborhood,
            k=args.k,
            k_new=args.k_new,
            min_dist=args.min_dist,
            dim=args.dim,
            metric=args.metric,
            n_epochs=args.epochs,
            seeds=args.seeds,
            neg_rate=args.neg_rate,
            **extra,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _manifest(args, command, cfg=None, **extra):
    out = {
        "command": command,
        "argv": sys.argv[1:],
        "data": getattr(args, "data", None),
        "labels": getattr(args, "labels", None),
        "format": getattr(args, "format", None),
        "output": str(args.out),
        "started": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    if cfg is not None:
        out["variant"] = cfg.tag
        out["config"] = cfg.to_dict()
    out.update(extra)
    return out


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_embed(args) -> int:
    cfg = _config_from_args(args)
    data, labels = load_dataset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, "embed", cfg, n_points=data.n_points, n_features=data.n_features)
    knn = exact_knn(data, cfg.k, cfg.metric)
    stages = build_graph(knn, cfg)
    if args.dump_graph and stages.g_prime is not None:
        stages.g_prime.write_edge_list(out / "g_prime.edges")
    embeddings = embed_graph(stages.fuzzy, cfg)
    files = []
    for emb in embeddings:
        path = out / f"embedding_seed{emb.seed}.tsv"
        io.save_embedding(emb, path)
        files.append(path.name)
    manifest["embeddings"] = files
    manifest["finished"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    _write_json(out / "manifest.json", manifest)
    log.info("wrote %d embeddings to %s", len(files), out)
    return 0


def _embedding_paths(args):
    paths = [Path(p) for p in args.embeddings]
    expanded = []
    for p in paths:
        if p.is_dir():
            expanded.extend(sorted(p.glob("embedding_seed*.tsv")))
        else:
            expanded.append(p)
    if not expanded:
        raise UsageError("no embedding files found")
    return expanded


def cmd_eval(args) -> int:
    labels = load_labels_any(args.labels)
    embeddings = [io.load_embedding(p) for p in _embedding_paths(args)]
    for emb in embeddings:
        if emb.n_points != len(labels):
            raise DataError(f"embedding has {emb.n_points} points but there are {len(labels)} labels")
    report = evaluation.evaluate_embeddings(embeddings, labels, n_init=args.n_init)
    payload = report.to_dict()
    payload["n_clusters"] = int(np.unique(labels.labels).size)
    variances = [evaluation.per_class_variance(e, labels) for e in embeddings]
    payload["per_class_variance"] = np.nanmean(np.stack(variances), axis=0).tolist()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, payload)
    with open(out.with_suffix(".tsv"), "w") as fh:
        fh.write("seed\t" + "\t".join(evaluation.METRIC_NAMES) + "\n")
        for i, seed in enumerate(report.seeds):
            fh.write(f"{seed}\t" + "\t".join(f"{report.per_seed[m][i]:.6f}" for m in evaluation.METRIC_NAMES) + "\n")
    if args.figures:
        mean_var = np.nanmean(np.stack(variances), axis=0)
        plotting.plot_class_variance({"embedding": mean_var}, out.with_suffix(".variance.png"), labels.class_names)
        if embeddings[0].dim == 2:
            plotting.plot_embedding(embeddings[0].coords, labels.labels, out.with_suffix(".scatter.png"),
                                    labels.class_names)
    log.info("NMI %.4f +- %.4f over %d embeddings", report.mean(), report.std(), len(embeddings))
    return 0


def cmd_grid(args) -> int:
    cfg = _config_from_args(args)
    k_values = parse_range(args.k_range, int) if args.k_range else DEFAULT_K_GRID
    md_values = parse_range(args.min_dist_range, float) if args.min_dist_range else DEFAULT_MIN_DIST_GRID
    if any(not 0 <= m <= 1 for m in md_values):
        raise UsageError("min_dist values must lie in [0, 1]")
    data, labels = load_dataset(args)
    if max(k_values) >= data.n_points:
        raise UsageError("largest k must be below the number of points")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cells_path = out / "grid_cells.json"
    # cells depend on everything except the two searched values
    signature = {key: val for key, val in cfg.to_dict().items() if key not in ("k", "min_dist")}
    completed = {}
    if cells_path.exists():
        with open(cells_path) as fh:
            saved = json.load(fh)
        if saved.get("config") == signature:
            completed = {k: evaluation.MetricReport.from_dict(v) for k, v in saved["cells"].items()}
            log.info("resuming grid: %d cells already complete", len(completed))
        else:
            log.warning("existing grid state was produced with a different config; starting over")
    state = {"config": signature,
             "cells": {k: v.to_dict() for k, v in completed.items()}}

    def on_cell(key, report):
        state["cells"][key] = report.to_dict()
        _write_json(cells_path, state)

    result = grid_search(data, labels, cfg, k_values, md_values, completed=completed,
                         on_cell=on_cell, n_init=args.n_init)
    wanted = {cell_key(k, m) for k in k_values for m in md_values}
    payload = result.to_dict()
    payload["cells"] = {key: val for key, val in payload["cells"].items() if key in wanted}
    payload["n_cells"] = len(payload["cells"])
    payload["manifest"] = _manifest(args, "grid", cfg)
    _write_json(out / "grid_report.json", payload)
    with open(out / "grid.tsv", "w") as fh:
        fh.write("k\tmin_dist\tnmi_mean\tnmi_std\n")
        for k in sorted(set(k_values)):
            for m in sorted(set(md_values)):
                rep = result.cells[cell_key(k, m)]
                fh.write(f"{k}\t{m:g}\t{rep.mean():.6f}\t{rep.std():.6f}\n")
    if args.figures:
        scores = {(k, m): result.cells[cell_key(k, m)].mean() for k in k_values for m in md_values}
        plotting.plot_grid_heatmap(scores, out / "grid_nmi.png", title=f"{cfg.tag}: mean NMI")
    log.info("best %s: k=%d min_dist=%g NMI %.4f", cfg.tag, result.best.k, result.best.min_dist,
             result.report.mean())
    return 0


def cmd_plot(args) -> int:
    emb = io.load_embedding(args.embedding)
    if emb.dim != 2:
        raise UsageError(f"plot needs a 2-D embedding, got dim={emb.dim}")
    labels = load_labels_any(args.labels)
    if len(labels) != emb.n_points:
        raise DataError(f"embedding has {emb.n_points} points but there are {len(labels)} labels")
    names = labels.class_names
    if args.class_names:
        names = [s.strip() for s in args.class_names.split(",")]
    svg = plotting.svg_scatter(emb.coords, labels.labels, names, title=args.title or "")
    with open(args.out, "w") as fh:
        fh.write(svg)
    return 0


def _add_method_flags(p):
    p.add_argument("--data", required=True, help="IDX images or coordinate sparse matrix")
    p.add_argument("--labels", required=True, help="IDX labels or one integer label per line")
    p.add_argument("--format", choices=("idx", "sparse"), required=True)
    p.add_argument("--variant", choices=("umap", "nn", "mst-min", "mst-all"), default="umap")
    p.add_argument("--neighborhood", choices=("adjacent", "path"), default="adjacent")
    p.add_argument("--k", type=int, default=15)
    p.add_argument("--k-new", type=int, default=None, help="path neighbourhood size (default: k)")
    p.add_argument("--min-dist", type=float, default=0.1)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--metric", choices=METRICS, default="euclidean")
    p.add_argument("--seeds", type=parse_seeds, default=(0, 1, 2, 3, 4))
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--neg-rate", type=int, default=5)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="umap-mnn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="embed a dataset, one TSV per seed")
    _add_method_flags(p)
    p.add_argument("--dump-graph", action="store_true", help="also write the repaired graph edge list")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="KMeans-score embeddings against labels")
    p.add_argument("--embeddings", nargs="+", required=True, help="TSV files or run directories")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="JSON report path (a .tsv is written alongside)")
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--figures", action="store_true", help="render PNG figures next to the report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="grid search over k and min_dist")
    _add_method_flags(p)
    p.add_argument("--k-range", default=None, help="start:stop:step, inclusive (default 10:50:5)")
    p.add_argument("--min-dist-range", default=None, help="start:stop:step, inclusive (default 0:1:0.1)")
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--figures", action="store_true")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("plot", help="SVG scatter of a 2-D embedding")
    p.add_argument("--embedding", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--class-names", default=None, help="comma-separated class names")
    p.add_argument("--title", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"umap-mnn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"umap-mnn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"umap-mnn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
