"""Acceptance criteria 1-7, one printed PASS/FAIL line each."""
import math
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import gaussian_blobs, random_weighted_graph
from test_connectivity import prim_weight
from test_evaluation import accuracy_oracle, t_pvalue_quadrature
from test_knn import full_sort_knn
from test_layout import _central_diff, dense_laplacian
from test_neighborhood import floyd_warshall
from umap_mnn import connectivity
from umap_mnn.evaluation import evaluate_embeddings, per_class_variance, score_all, welch_t_test
from umap_mnn.fuzzy import fuzzy_simplicial_set, solve_sigma
from umap_mnn.io import FeatureMatrix, load_idx
from umap_mnn.knn import exact_knn, mutual_knn
from umap_mnn.layout import attractive_coeff, fit_ab, repulsive_coeff, spectral_vectors
from umap_mnn.neighborhood import adjacent_neighbors, path_neighbors
from umap_mnn.pipeline import MethodConfig, build_graph, embed_graph, run_variant, table_variants

DATA = Path(__file__).resolve().parents[1] / "data"
MNIST = (DATA / "mnist10k-images-idx3-ubyte.gz", DATA / "mnist10k-labels-idx1-ubyte.gz")


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def test_criterion_1_oracle_equivalence(capsys):
    rng = np.random.default_rng(1)
    failures = []

    for metric in ("euclidean", "cosine", "jaccard"):
        X = rng.normal(size=(200, 8)) if metric != "jaccard" else (rng.random((200, 30)) < 0.2) * 1.0
        knn = exact_knn(X, 10, metric)
        idx, dist = full_sort_knn(X, 10, metric)
        if not np.allclose(knn.distances, dist, atol=1e-12):
            failures.append(f"knn distances ({metric})")
        if metric != "jaccard" and not np.array_equal(knn.indices, idx):
            failures.append(f"knn indices ({metric})")

    for seed in range(10):
        g = random_weighted_graph(100, 0.05, np.random.default_rng(seed), connected=True)
        _, _, w = connectivity.minimum_spanning_forest(g).edges()
        if not math.isclose(w.sum(), prim_weight(g), rel_tol=1e-12):
            failures.append(f"mst weight seed {seed}")

    for seed in range(10):
        g = random_weighted_graph(50, 0.1, np.random.default_rng(seed), connected=True)
        D = floyd_warshall(g)
        hoods = path_neighbors(g, 8)
        for i in range(50):
            idx, d = hoods.row(i)
            kth = np.sort(np.delete(D[i], i))[7]
            if not (np.allclose(d, D[i, idx], rtol=1e-12) and d.max() <= kth + 1e-12):
                failures.append(f"path neighbours seed {seed} row {i}")

    for seed in range(30):
        r = np.random.default_rng(seed)
        truth = r.integers(0, 6, 25).tolist()
        pred = r.integers(0, 6, 25).tolist()
        if not math.isclose(score_all(truth, pred)["accuracy"], accuracy_oracle(truth, pred), abs_tol=1e-12):
            failures.append(f"accuracy seed {seed}")

    for seed in range(5):
        g = random_weighted_graph(30, 0.2, np.random.default_rng(seed), connected=True)
        u, v, w = g.edges()
        W = sp.coo_matrix((np.r_[w, w], (np.r_[u, v], np.r_[v, u])), shape=(30, 30)).tocsr()
        L = dense_laplacian(W)
        for method in ("dense", "iterative"):
            vals, vecs = spectral_vectors(W, 2, method)
            res = max(np.linalg.norm(L @ x - lam * x) for lam, x in zip(vals, vecs.T))
            if res > 1e-6 or not np.allclose(vals, np.linalg.eigvalsh(L)[1:3], atol=1e-8):
                failures.append(f"spectral {method} seed {seed}")

    Y = np.random.default_rng(5).uniform(-3, 3, size=(10, 2))
    curve = fit_ab(0.1)
    worst = 0.0
    for i in range(10):
        for j in range(10):
            if i == j:
                continue
            diff = Y[i] - Y[j]
            d2 = diff @ diff
            fa = _central_diff(lambda y: np.log(curve(np.linalg.norm(y - Y[j]))), Y[i].copy())
            fr = _central_diff(lambda y: np.log(1 - curve(np.linalg.norm(y - Y[j]))), Y[i].copy())
            ga = attractive_coeff(d2, curve.a, curve.b) * diff
            gr = repulsive_coeff(d2, curve.a, curve.b, 0.0) * diff
            worst = max(worst, np.abs(ga - fa).max() / np.abs(fa).max(), np.abs(gr - fr).max() / np.abs(fr).max())
    if worst > 1e-4:
        failures.append(f"gradient rel err {worst:.2e}")

    verdict(capsys, 1, not failures, f"knn/MST/paths/accuracy/spectral/gradients; max grad rel err {worst:.1e}; "
            f"failures: {failures or 'none'}")


def test_criterion_2_invariants(capsys):
    rng = np.random.default_rng(2)
    failures = []
    for seed in range(8):
        r = np.random.default_rng(seed)
        X = np.concatenate([r.normal(size=(60, 5)) + 6 * r.normal(size=5) for _ in range(3)])
        k = int(r.integers(4, 12))
        knn = exact_knn(X, k)
        mknn = mutual_knn(knn)
        knn_edges = knn.symmetrized().edge_set()
        if not mknn.edge_set() <= knn_edges or mknn.degree().max() > k:
            failures.append(f"mutual subset/degree seed {seed}")
        mst = connectivity.minimum_spanning_forest(knn)
        g_min = connectivity.connect_mst_min(mknn, mst)
        g_all = connectivity.connect_mst_all(mknn, mst)
        added = g_min.n_edges - mknn.n_edges
        drop = (connectivity.connected_components(mknn).n_components
                - connectivity.connected_components(g_min).n_components)
        if added != drop or not g_min.edge_set() <= g_all.edge_set():
            failures.append(f"mst-min count/subset seed {seed}")
        for name, g in (("adjacent", g_min), ("path", g_min)):
            hoods = adjacent_neighbors(g) if name == "adjacent" else path_neighbors(g, k)
            M = fuzzy_simplicial_set(hoods).matrix
            if (M != M.T).nnz or M.data.min() <= 0 or M.data.max() > 1:
                failures.append(f"fuzzy symmetry/range {name} seed {seed}")

    worst_sigma = 0.0
    for _ in range(200):
        d = np.sort(rng.uniform(0.01, 10, int(rng.integers(2, 40))))
        target = math.log2(d.size)
        sigma = solve_sigma(d, d[0], target)
        total = np.exp(-np.maximum(0, d - d[0]) / sigma).sum()
        if np.exp(-np.maximum(0, d - d[0]) / (1e-3 * d.mean())).sum() < target:
            worst_sigma = max(worst_sigma, abs(total - target))
    if worst_sigma > 1e-5:
        failures.append(f"sigma residual {worst_sigma:.1e}")

    X, _ = gaussian_blobs(50, 3, 6, rng)
    cfg = MethodConfig.variant("mst-min", "path", k=10, seeds=(4,), n_epochs=100)
    a, b = run_variant(FeatureMatrix(X), cfg)[0], run_variant(FeatureMatrix(X), cfg)[0]
    if a.coords.tobytes() != b.coords.tobytes():
        failures.append("determinism")

    for seed in range(30):
        r = np.random.default_rng(seed)
        truth, pred = r.integers(0, 5, 40), r.integers(0, 5, 40)
        s = score_all(truth, pred)
        t = score_all(r.permutation(5)[truth], r.permutation(5)[pred])
        if not (all(0 <= s[m] <= 1 for m in ("nmi", "accuracy", "purity")) and -1 <= s["ari"] <= 1
                and all(math.isclose(s[m], t[m], abs_tol=1e-12) for m in s)):
            failures.append(f"metric range/relabel seed {seed}")

    verdict(capsys, 2, not failures, f"graph, fuzzy, sigma (max residual {worst_sigma:.1e}), determinism, metrics; "
            f"failures: {failures or 'none'}")


def test_criterion_3_synthetic_recovery(capsys):
    X, y = gaussian_blobs(100, 5, 10, np.random.default_rng(3))
    data = FeatureMatrix(X)
    knn = exact_knn(data, 15)
    scores = {}
    for cfg in table_variants(k=15, dim=2):
        scores[cfg.tag] = evaluate_embeddings(run_variant(data, cfg, knn=knn), y).mean("nmi")
    worst = min(scores.values())
    detail = ", ".join(f"{tag} {v:.3f}" for tag, v in scores.items())
    verdict(capsys, 3, len(scores) == 7 and worst >= 0.95, f"min mean NMI {worst:.3f} (>= 0.95): {detail}")


@pytest.fixture(scope="module")
def mnist():
    if not all(p.exists() for p in MNIST):
        pytest.fail("MNIST subset missing; run scripts/fetch_mnist_subset.py")
    data, labels = load_idx(*MNIST)
    return data, labels.labels, exact_knn(data, 20)


@pytest.mark.slow
def test_criterion_4_mnist_direction(capsys, mnist):
    data, y, knn = mnist
    results = {}
    for cfg in (MethodConfig.variant("umap", k=20), MethodConfig.variant("mst-min", "path", k=20)):
        embs = embed_graph(build_graph(knn, cfg).fuzzy, cfg)
        results[cfg.tag] = evaluate_embeddings(embs, y)
    gap = results["mst-min+path"].mean() - results["umap"].mean()
    t = welch_t_test(results["mst-min+path"].per_seed["nmi"], results["umap"].per_seed["nmi"])
    detail = (f"NMI umap {results['umap'].mean():.4f}+-{results['umap'].std():.4f}, "
              f"mst-min+path {results['mst-min+path'].mean():.4f}+-{results['mst-min+path'].std():.4f}, "
              f"gap {gap:+.4f} (>= +0.02), Welch p {t.pvalue:.2g}")
    verdict(capsys, 4, gap >= 0.02, detail)


@pytest.mark.slow
def test_criterion_5_mnist_disconnection(capsys, mnist):
    data, _, knn = mnist
    mknn = mutual_knn(knn)
    comps = connectivity.connected_components(mknn)
    outside = comps.outside_giant() / data.n_points
    mst = connectivity.minimum_spanning_forest(knn)
    g_nn = connectivity.connect_nn(mknn, knn)
    knn_connected = connectivity.connected_components(knn.symmetrized()).n_components == 1
    n_min = connectivity.connected_components(connectivity.connect_mst_min(mknn, mst)).n_components
    n_all = connectivity.connected_components(connectivity.connect_mst_all(mknn, mst)).n_components
    isolated = int((g_nn.degree() == 0).sum())
    ok = outside >= 0.01 and isolated == 0 and (not knn_connected or n_min == n_all == 1)
    detail = (f"{comps.n_components} mutual components, {outside:.2%} outside giant (>= 1%), "
              f"isolated after NN {isolated}, k-NN connected {knn_connected}, "
              f"components after MST-min {n_min} / MST-all {n_all}")
    verdict(capsys, 5, ok, detail)


def newsgroup_like_corpus(seed, n_per=150, n_classes=4, vocab=3000):
    """Bag-of-words counts: each class mixes its own sparse topic with a shared background."""
    rng = np.random.default_rng(seed)
    background = rng.dirichlet(np.full(vocab, 0.05))
    topics = [rng.dirichlet(np.full(vocab, 0.02)) for _ in range(n_classes)]
    rows, cols, vals, y = [], [], [], []
    for c in range(n_classes):
        for _ in range(n_per):
            mix = rng.uniform(0.3, 0.7)
            counts = rng.multinomial(rng.poisson(60) + 5, mix * topics[c] + (1 - mix) * background)
            nz = np.flatnonzero(counts)
            rows.extend([len(y)] * nz.size)
            cols.extend(nz.tolist())
            vals.extend(counts[nz].tolist())
            y.append(c)
    X = sp.csr_matrix((vals, (rows, cols)), shape=(len(y), vocab), dtype=np.float64)
    return FeatureMatrix(X), np.array(y)


def test_criterion_6_variance_direction(capsys):
    wins, total, lines = 0, 0, []
    for seed in range(4):
        data, y = newsgroup_like_corpus(seed)
        knn = exact_knn(data, 15, "jaccard")
        var = {}
        for hood in ("adjacent", "path"):
            cfg = MethodConfig.variant("mst-all", hood, k=15, metric="jaccard")
            embs = embed_graph(build_graph(knn, cfg).fuzzy, cfg)
            var[hood] = np.mean([per_class_variance(e, y).mean(axis=1) for e in embs], axis=0)
        held = var["adjacent"] >= var["path"]
        wins += int(held.sum())
        total += held.size
        lines.append(f"corpus {seed}: {int(held.sum())}/{held.size}")
    frac = wins / total
    verdict(capsys, 6, frac >= 0.7,
            f"adjacent >= path variance for {wins}/{total} classes ({frac:.0%}, soft >= 70%); " + ", ".join(lines))


def test_criterion_7_welch_quadrature(capsys):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        a = rng.normal(0, rng.uniform(0.05, 3), int(rng.integers(2, 15)))
        b = rng.normal(rng.uniform(-2, 2), rng.uniform(0.05, 3), int(rng.integers(2, 15)))
        r = welch_t_test(a, b)
        worst = max(worst, abs(r.pvalue - t_pvalue_quadrature(r.statistic, r.df)))
    verdict(capsys, 7, worst <= 1e-6, f"max |p - quadrature p| over 100 cases {worst:.1e} (<= 1e-6)")
