#!/usr/bin/env python3
"""Build a small MNIST set in IDX format from the 5000-image sample shipped in the
mlxtend wheel (500 images per digit).

The first 400 images of each digit become the training split and the last 100 the
test split, so both splits are class-balanced. Output files use the standard MNIST
names and can be pointed at with SUPLAB_DATA_DIR.

    python3 tools/make_mnist_subset.py data/mnist5k
"""
import argparse
import glob
import gzip
import io
import struct
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

import numpy as np

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fetch_csv(wheel: str | None) -> np.ndarray:
    if wheel is None:
        tmp = tempfile.mkdtemp()
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                        "mlxtend", "-d", tmp], check=True)
        wheel = glob.glob(f"{tmp}/mlxtend-*.whl")[0]
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read(MEMBER))
    return np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)


def write_idx(path: Path, arr: np.ndarray) -> None:
    header = bytes([0, 0, 0x08, arr.ndim]) + b"".join(struct.pack(">I", n) for n in arr.shape)
    path.write_bytes(header + arr.astype(np.uint8).tobytes())


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("out", type=Path)
    ap.add_argument("--wheel", default=None, help="local mlxtend wheel (skips pip download)")
    ap.add_argument("--train-per-class", type=int, default=400)
    args = ap.parse_args()

    table = fetch_csv(args.wheel)
    pixels, labels = table[:, :-1], table[:, -1]
    train, test = [], []
    for digit in range(10):
        rows = np.flatnonzero(labels == digit)
        train.extend(rows[: args.train_per_class])
        test.extend(rows[args.train_per_class:])
    train, test = np.array(train), np.array(test)

    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train-images-idx3-ubyte", pixels[train].reshape(-1, 28, 28))
    write_idx(args.out / "train-labels-idx1-ubyte", labels[train])
    write_idx(args.out / "t10k-images-idx3-ubyte", pixels[test].reshape(-1, 28, 28))
    write_idx(args.out / "t10k-labels-idx1-ubyte", labels[test])
    print(f"wrote {len(train)} train / {len(test)} test images to {args.out}")


if __name__ == "__main__":
    main()
