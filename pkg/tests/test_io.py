import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from umap_mnn.exceptions import ConsistencyError, FormatError
from umap_mnn.io import (
    FeatureMatrix, load_embedding, load_idx, load_sparse_matrix, read_sparse, save_embedding,
    write_idx, write_sparse,
)
from umap_mnn.layout import Embedding


def _idx_pair(tmp_path, images, labels, gz=False):
    suffix = ".gz" if gz else ""
    ip, lp = tmp_path / f"img{suffix}", tmp_path / f"lab{suffix}"
    write_idx(ip, np.asarray(images, dtype=np.uint8))
    write_idx(lp, np.asarray(labels, dtype=np.uint8))
    return ip, lp


@pytest.mark.parametrize("gz", [False, True])
def test_load_idx_decodes_pixels_and_labels(tmp_path, gz):
    ip, lp = _idx_pair(tmp_path, [[[0, 1], [2, 3]], [[4, 5], [6, 7]]], [3, 7], gz)
    X, y = load_idx(ip, lp)
    np.testing.assert_array_equal(X.data, [[0, 1, 2, 3], [4, 5, 6, 7]])
    assert X.n_features == 4 and not X.is_sparse
    np.testing.assert_array_equal(y.labels, [3, 7])


def test_idx_header_bytes(tmp_path):
    ip, _ = _idx_pair(tmp_path, np.zeros((2, 3, 4)), [0, 1])
    raw = ip.read_bytes()
    assert raw[:16] == bytes.fromhex("00000803" "00000002" "00000003" "00000004")
    assert len(raw) == 16 + 24


def test_label_file_with_image_magic_is_rejected(tmp_path):
    ip, _ = _idx_pair(tmp_path, np.zeros((2, 2, 2)), [0, 1])
    bad = tmp_path / "bad"
    bad.write_bytes(bytes.fromhex("00000803" "00000002") + b"\x00\x01")
    with pytest.raises(FormatError):
        load_idx(ip, bad)


def test_idx_count_mismatch(tmp_path):
    ip, lp = _idx_pair(tmp_path, np.zeros((2, 2, 2)), [0, 1, 1])
    with pytest.raises(ConsistencyError):
        load_idx(ip, lp)


def test_idx_truncated_payload(tmp_path):
    ip, lp = _idx_pair(tmp_path, np.zeros((2, 2, 2)), [0, 1])
    ip.write_bytes(ip.read_bytes()[:-1])
    with pytest.raises(FormatError):
        load_idx(ip, lp)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_sparse_decode(tmp_path):
    m = _write(tmp_path, "m.txt", "2 3 2\n1 1 1.0\n2 3 2.0\n")
    y = _write(tmp_path, "y.txt", "0\n1\n")
    X, labels = load_sparse_matrix(m, y)
    assert X.is_sparse
    np.testing.assert_array_equal(X.data.toarray(), [[1.0, 0, 0], [0, 0, 2.0]])
    np.testing.assert_array_equal(labels.labels, [0, 1])


@pytest.mark.parametrize("body,match", [
    ("2 3 2\n3 1 1.0\n1 1 1.0\n", "outside"),
    ("2 3 3\n1 1 1.0\n2 3 2.0\n", "nnz"),
    ("2 3 1\n1 1 1.0\n2 3 2.0\n", "more entries"),
    ("2 3 2\n1 1 1.0\n1 1 2.0\n", "duplicate"),
    ("2 3 1\n1 1 nan\n", "non-finite"),
    ("2 3 1\n1 1 inf\n", "non-finite"),
])
def test_sparse_contract_errors(tmp_path, body, match):
    with pytest.raises(FormatError, match=match):
        read_sparse(_write(tmp_path, "m.txt", body))


def test_sparse_label_count_mismatch(tmp_path):
    m = _write(tmp_path, "m.txt", "2 3 1\n1 1 1.0\n")
    y = _write(tmp_path, "y.txt", "0\n1\n2\n")
    with pytest.raises(ConsistencyError):
        load_sparse_matrix(m, y)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_sparse_round_trip(tmp_path_factory, rows, cols, density, seed):
    rng = np.random.default_rng(seed)
    M = sp.random(rows, cols, density=density, random_state=rng, format="csr")
    M.data = rng.normal(size=M.data.size) * 10.0 ** rng.integers(-5, 5, size=M.data.size)
    path = tmp_path_factory.mktemp("sp") / "m.txt"
    write_sparse(path, M)
    back = read_sparse(path)
    assert (back.data != M).nnz == 0
    assert back.data.shape == M.shape


def test_feature_matrix_rejects_nan():
    with pytest.raises(FormatError):
        FeatureMatrix(np.array([[0.0, np.nan]]))


def test_dense_and_sparse_rows_agree(rng):
    D = rng.normal(size=(5, 7))
    D[D < 0.3] = 0
    dense, sparse = FeatureMatrix(D), FeatureMatrix(sp.csr_matrix(D))
    for i in range(5):
        np.testing.assert_array_equal(dense.row(i), sparse.row(i))
    cols = sparse.data.indices[sparse.data.indptr[2]:sparse.data.indptr[3]]
    assert np.all(np.diff(cols) > 0)


def test_embedding_round_trip_bit_exact(tmp_path, rng):
    coords = rng.normal(size=(100, 2)) * np.array([1e-300, 1e300])
    coords[0] = [np.pi, -0.0]
    emb = Embedding(coords, seed=7, hyperparams={"k": 15, "min_dist": 0.1, "method": "umap"})
    path = tmp_path / "e.tsv"
    save_embedding(emb, path)
    back = load_embedding(path)
    assert back.coords.tobytes() == emb.coords.tobytes()
    assert back.seed == 7 and back.hyperparams["k"] == 15


def test_empty_embedding_round_trip(tmp_path):
    path = tmp_path / "e.tsv"
    save_embedding(Embedding(np.zeros((0, 3)), seed=1), path)
    assert len(path.read_text().splitlines()) == 1
    back = load_embedding(path)
    assert back.coords.shape == (0, 3)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False, width=64),
                          st.floats(allow_nan=False, allow_infinity=False, width=64)),
                max_size=100))
def test_embedding_round_trip_property(tmp_path_factory, rows):
    coords = np.asarray(rows, dtype=np.float64).reshape(-1, 2)
    path = tmp_path_factory.mktemp("emb") / "e.tsv"
    save_embedding(Embedding(coords, seed=0, dim=2), path)
    assert load_embedding(path).coords.tobytes() == coords.tobytes()


def test_embedding_column_mismatch(tmp_path):
    path = tmp_path / "e.tsv"
    save_embedding(Embedding(np.ones((2, 2)), seed=0), path)
    with open(path, "a") as fh:
        fh.write("1.0\t2.0\t3.0\n")
    with pytest.raises(FormatError, match="columns"):
        load_embedding(path)
