#!/usr/bin/env python3
"""Full-scale MNIST comparison of all seven methods (hours on one core; not run in CI).

Point it at the standard 70,000-digit IDX files (train and test concatenated,
or any single pair). Each variant is embedded once per seed at the given k
and min_dist, scored with KMeans, and summarised as mean NMI with a Welch
t-test of MST-min + Path Neighbors against default UMAP.

Usage::

    python scripts/run_full_mnist.py --images train-images-idx3-ubyte.gz t10k-images-idx3-ubyte.gz \\
        --labels train-labels-idx1-ubyte.gz t10k-labels-idx1-ubyte.gz --k 20 --out full_mnist.json
"""
import argparse
import json
import logging
import time

import numpy as np

from umap_mnn.evaluation import evaluate_embeddings, welch_t_test
from umap_mnn.io import FeatureMatrix, load_idx
from umap_mnn.knn import exact_knn
from umap_mnn.pipeline import build_graph, embed_graph, table_variants


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--images", nargs="+", required=True)
    ap.add_argument("--labels", nargs="+", required=True)
    ap.add_argument("--k", type=int, default=20)
    ap.add_argument("--min-dist", type=float, default=0.1)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--out", default="full_mnist.json")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    if len(args.images) != len(args.labels):
        ap.error("--images and --labels need the same number of files")

    parts = [load_idx(i, l) for i, l in zip(args.images, args.labels)]
    X = FeatureMatrix(np.vstack([p[0].data for p in parts]))
    y = np.concatenate([p[1].labels for p in parts])
    logging.info("%d points, %d features", X.n_points, X.n_features)

    t0 = time.time()
    knn = exact_knn(X, args.k)
    logging.info("exact k-NN in %.0fs", time.time() - t0)

    results = {}
    for cfg in table_variants(k=args.k, min_dist=args.min_dist, dim=args.dim):
        t0 = time.time()
        report = evaluate_embeddings(embed_graph(build_graph(knn, cfg).fuzzy, cfg), y)
        results[cfg.tag] = report.to_dict()
        logging.info("%-18s NMI %.4f +- %.4f (%.0fs)", cfg.tag, report.mean(), report.std(), time.time() - t0)

    test = welch_t_test(results["mst-min+path"]["per_seed"]["nmi"], results["umap"]["per_seed"]["nmi"])
    results["welch_mst_min_path_vs_umap"] = {"t": test.statistic, "p": test.pvalue, "df": test.df}
    with open(args.out, "w") as fh:
        json.dump(results, fh, indent=2)
    print(f"{'method':18s} NMI")
    for tag, rep in results.items():
        if "nmi" in rep:
            print(f"{tag:18s} {rep['nmi']['mean']:.3f} +- {rep['nmi']['std']:.3f}")
    print(f"Welch t-test MST-min + path vs UMAP: p = {test.pvalue:.3g}")


if __name__ == "__main__":
    main()
