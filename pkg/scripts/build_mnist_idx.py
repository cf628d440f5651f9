"""Rebuild the bundled MNIST IDX files from the npm ``mnist`` package.

The npm package (``npm pack mnist``) ships 10,000 MNIST digits as JSON arrays
of pixel intensities already divided by 255 and rounded to three decimals.
This script maps them back to bytes, shuffles them with a fixed seed, and
writes two 5,000-image IDX pairs (gzip-compressed) under ``data/mnist/``.

Usage::

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python scripts/build_mnist_idx.py package/src/digits data/mnist
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np

SEED = 20190101


def _write_idx(path, magic, arr):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", n) for n in arr.shape)
    # mtime=0 keeps the archives byte-stable across rebuilds
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
        fh.write(header + arr.astype(np.uint8).tobytes())


def main(digits_dir, out_dir):
    images, labels = [], []
    for digit in range(10):
        rows = json.loads(Path(digits_dir, f"{digit}.json").read_text())["data"]
        block = np.asarray(rows, dtype=np.float64).reshape(-1, 784)
        images.append(np.rint(block * 255.0).clip(0, 255).astype(np.uint8))
        labels.append(np.full(len(block), digit, dtype=np.uint8))
    images = np.concatenate(images)
    labels = np.concatenate(labels)
    order = np.random.default_rng(SEED).permutation(len(labels))
    images, labels = images[order], labels[order]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    half = len(labels) // 2
    for name, sl in (("train", slice(0, half)), ("t10k", slice(half, 2 * half))):
        _write_idx(out / f"{name}-images-idx3-ubyte.gz", 0x803, images[sl].reshape(-1, 28, 28))
        _write_idx(out / f"{name}-labels-idx1-ubyte.gz", 0x801, labels[sl])
    print(f"wrote {half} train / {half} test images to {out}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
