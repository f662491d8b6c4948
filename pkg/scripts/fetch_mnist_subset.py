#!/usr/bin/env python3
"""Build the 10,000-digit MNIST desk subset used by the acceptance suite.

The digits come from the ``mnist`` npm package, which ships 10,000 real MNIST
samples as JSON arrays of ``pixel / 255`` rounded to three decimals. Rounding
``value * 255`` recovers the original bytes. The result is written as gzipped
IDX files next to this repository's ``data/`` directory.

Usage::

    python scripts/fetch_mnist_subset.py            # runs `npm pack mnist`
    python scripts/fetch_mnist_subset.py --package /path/to/unpacked/package
"""
import argparse
import json
import pathlib
import subprocess
import tarfile
import tempfile

import numpy as np

from umap_mnn.io import write_idx

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load_npm_digits(package_dir):
    images, labels = [], []
    for digit in range(10):
        path = pathlib.Path(package_dir) / "src" / "digits" / f"{digit}.json"
        with open(path) as fh:
            flat = np.asarray(json.load(fh)["data"], dtype=np.float64)
        block = np.rint(flat.reshape(-1, 28, 28) * 255.0).clip(0, 255)
        images.append(block.astype(np.uint8))
        labels.append(np.full(block.shape[0], digit, dtype=np.uint8))
    return np.concatenate(images), np.concatenate(labels)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--package", help="unpacked npm package directory")
    parser.add_argument("--out", default=str(ROOT / "data"))
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        package = args.package
        if package is None:
            subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=tmp, check=True)
            with tarfile.open(pathlib.Path(tmp) / "mnist-1.1.0.tgz") as tar:
                tar.extractall(tmp)
            package = pathlib.Path(tmp) / "package"
        images, labels = load_npm_digits(package)

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "mnist10k-images-idx3-ubyte.gz", images)
    write_idx(out / "mnist10k-labels-idx1-ubyte.gz", labels)
    print(f"wrote {images.shape[0]} digits, class counts {np.bincount(labels).tolist()}")


if __name__ == "__main__":
    main()
