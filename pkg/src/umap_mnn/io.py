"""Readers and writers for IDX images, coordinate sparse text and embeddings.

Three on-disk formats are supported:

* IDX (MNIST style): big-endian magic ``0x00000803`` for ``uint8`` image
  stacks and ``0x00000801`` for ``uint8`` label vectors, optionally gzipped.
* Coordinate sparse text: a ``rows cols nnz`` header followed by ``nnz`` lines
  of 1-indexed ``row col value`` triples. Lines starting with ``%`` are skipped.
* Embedding TSV: a ``#``-prefixed JSON header line, then one row per point.
"""
from __future__ import annotations

import gzip
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import ConsistencyError, FormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

PathLike = Union[str, Path]


@dataclass(frozen=True)
class FeatureMatrix:
    """An ``n_points x n_features`` matrix, dense ndarray or CSR sparse."""

    data: Union[np.ndarray, sp.csr_matrix]

    def __post_init__(self):
        data = self.data
        if sp.issparse(data):
            data = sp.csr_matrix(data, dtype=np.float64)
            data.sum_duplicates()
            data.sort_indices()
            values = data.data
        else:
            data = np.ascontiguousarray(data, dtype=np.float64)
            if data.ndim != 2:
                raise FormatError(f"feature matrix must be 2-D, got shape {data.shape}")
            values = data
        if not np.all(np.isfinite(values)):
            raise FormatError("feature matrix contains NaN or Inf")
        object.__setattr__(self, "data", data)

    @property
    def n_points(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    def row(self, i: int) -> np.ndarray:
        """Dense copy of row ``i`` regardless of storage."""
        if self.is_sparse:
            return self.data.getrow(i).toarray().ravel()
        return self.data[i].copy()

    def subset(self, idx) -> "FeatureMatrix":
        return FeatureMatrix(self.data[np.asarray(idx)])


@dataclass(frozen=True)
class LabelVector:
    labels: np.ndarray
    class_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or (labels.size and labels.min() < 0):
            raise FormatError("labels must be a 1-D array of non-negative ints")
        labels = labels.astype(np.int64)
        object.__setattr__(self, "labels", labels)
        if self.class_names is not None and labels.size and labels.max() >= len(self.class_names):
            raise FormatError("label id exceeds the number of class names")

    @property
    def n_classes(self) -> int:
        if self.class_names is not None:
            return len(self.class_names)
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> "LabelVector":
        return LabelVector(self.labels[np.asarray(idx)], self.class_names)


def _open(path: PathLike, mode: str = "rb"):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode)
    return open(path, mode)


def _read_idx(path: PathLike, expected_magic: int, ndim: int) -> np.ndarray:
    with _open(path) as fh:
        raw = fh.read()
    if len(raw) < 4 + 4 * ndim:
        raise FormatError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise FormatError(f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    dims = struct.unpack(">" + "I" * ndim, raw[4 : 4 + 4 * ndim])
    payload = np.frombuffer(raw, dtype=np.uint8, offset=4 + 4 * ndim)
    if payload.size != int(np.prod(dims)):
        raise FormatError(f"{path}: payload holds {payload.size} bytes, header implies {int(np.prod(dims))}")
    return payload.reshape(dims)


def load_idx(images_path: PathLike, labels_path: PathLike) -> tuple[FeatureMatrix, LabelVector]:
    """Load an IDX image/label pair; images are flattened, pixels kept in [0, 255]."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise ConsistencyError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    flat = images.reshape(images.shape[0], -1).astype(np.float64)
    return FeatureMatrix(flat), LabelVector(labels.astype(np.int64))


def write_idx(path: PathLike, array: np.ndarray) -> None:
    """Write a ``uint8`` array as IDX (3-D images or 1-D labels)."""
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise FormatError("IDX writer only supports uint8 payloads")
    if array.ndim == 3:
        magic = IDX_IMAGES_MAGIC
    elif array.ndim == 1:
        magic = IDX_LABELS_MAGIC
    else:
        raise FormatError(f"IDX writer expects 1-D or 3-D arrays, got {array.ndim}-D")
    header = struct.pack(">I" + "I" * array.ndim, magic, *array.shape)
    with _open(path, "wb") as fh:
        fh.write(header + np.ascontiguousarray(array).tobytes())


def _content_lines(fh):
    for lineno, line in enumerate(fh, 1):
        text = line.strip()
        if text and not text.startswith("%"):
            yield lineno, text


def load_labels(path: PathLike) -> LabelVector:
    """One integer label per line; optional ``# names: a,b,c`` first line."""
    names = None
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                if text[1:].strip().startswith("names:"):
                    names = [s.strip() for s in text.split(":", 1)[1].split(",")]
                continue
            try:
                values.append(int(text))
            except ValueError:
                raise FormatError(f"{path}:{lineno}: label {text!r} is not an integer") from None
    return LabelVector(np.asarray(values, dtype=np.int64), names)


def load_sparse_matrix(matrix_path: PathLike, labels_path: PathLike) -> tuple[FeatureMatrix, LabelVector]:
    matrix = read_sparse(matrix_path)
    labels = load_labels(labels_path)
    if matrix.n_points != len(labels):
        raise ConsistencyError(f"{matrix.n_points} rows but {len(labels)} labels")
    return matrix, labels


def read_sparse(path: PathLike) -> FeatureMatrix:
    with _open(path, "rt") as fh:
        lines = _content_lines(fh)
        try:
            lineno, header = next(lines)
        except StopIteration:
            raise FormatError(f"{path}: empty sparse matrix file") from None
        parts = header.split()
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: header must be 'rows cols nnz'")
        n_rows, n_cols, nnz = (int(p) for p in parts)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        count = 0
        for lineno, text in lines:
            if count >= nnz:
                raise FormatError(f"{path}:{lineno}: more entries than declared nnz={nnz}")
            parts = text.split()
            if len(parts) != 3:
                raise FormatError(f"{path}:{lineno}: expected 'row col value'")
            r, c, v = int(parts[0]), int(parts[1]), float(parts[2])
            if not (1 <= r <= n_rows and 1 <= c <= n_cols):
                raise FormatError(f"{path}:{lineno}: index ({r}, {c}) outside {n_rows}x{n_cols}")
            if not math.isfinite(v):
                raise FormatError(f"{path}:{lineno}: non-finite value {parts[2]}")
            rows[count], cols[count], vals[count] = r - 1, c - 1, v
            count += 1
    if count != nnz:
        raise FormatError(f"{path}: header declares nnz={nnz} but file has {count} entries")
    key = rows * n_cols + cols
    if np.unique(key).size != nnz:
        raise FormatError(f"{path}: duplicate (row, col) entries")
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n_rows, n_cols))
    return FeatureMatrix(matrix)


def write_sparse(path: PathLike, matrix: Union[FeatureMatrix, sp.spmatrix]) -> None:
    if isinstance(matrix, FeatureMatrix):
        matrix = matrix.data
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with _open(path, "wt") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r + 1} {c + 1} {float(v)!r}\n")


def save_embedding(embedding, path: PathLike) -> None:
    """Write an :class:`~umap_mnn.layout.Embedding` as TSV with a JSON header."""
    coords = np.asarray(embedding.coords, dtype=np.float64)
    header = {
        "n_points": int(coords.shape[0]),
        "dim": int(embedding.dim),
        "seed": embedding.seed,
        "hyperparams": embedding.hyperparams,
    }
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        for row in coords:
            fh.write("\t".join(format(v, ".17g") for v in row) + "\n")


def load_embedding(path: PathLike):
    from .layout import Embedding

    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise FormatError(f"{path}: missing embedding header line")
        try:
            header = json.loads(first[1:])
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: unreadable embedding header: {exc}") from None
        dim = int(header["dim"])
        rows = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != dim:
                raise FormatError(f"{path}:{lineno}: expected {dim} columns, found {len(fields)}")
            rows.append([float(v) for v in fields])
    coords = np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
    if "n_points" in header and coords.shape[0] != header["n_points"]:
        raise FormatError(f"{path}: header says {header['n_points']} rows, found {coords.shape[0]}")
    if not np.all(np.isfinite(coords)):
        raise FormatError(f"{path}: embedding contains NaN or Inf")
    return Embedding(coords, seed=header.get("seed"), hyperparams=header.get("hyperparams", {}), dim=dim)
