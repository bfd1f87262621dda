#!/usr/bin/env python3
"""Build gzipped IDX files from the digit JSON shipped in the npm `mnist` package.

The package bundles 10,000 MNIST digits as normalized pixel lists grouped by
class. This script shuffles them with a fixed seed, splits them into train and
test partitions and writes the standard IDX layout:

    train-images-idx3-ubyte.gz  train-labels-idx1-ubyte.gz
    t10k-images-idx3-ubyte.gz   t10k-labels-idx1-ubyte.gz

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist
"""
import argparse
import gzip
import json
import pathlib
import struct

import numpy as np


def write_idx(path, array, dims):
    magic = 0x0800 | len(dims)  # unsigned byte payload
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(array.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--test", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    images, labels = [], []
    for digit in range(10):
        raw = json.loads(pathlib.Path(args.digits_dir, f"{digit}.json").read_text())
        pixels = np.asarray(raw["data"], dtype=np.float64).reshape(-1, 28, 28)
        images.append(np.rint(pixels * 255.0).clip(0, 255))
        labels.append(np.full(len(pixels), digit))
    images = np.concatenate(images)
    labels = np.concatenate(labels)

    order = np.random.default_rng(args.seed).permutation(len(labels))
    images, labels = images[order], labels[order]
    n_train = len(labels) - args.test

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train-images-idx3-ubyte.gz", images[:n_train], (n_train, 28, 28))
    write_idx(out / "train-labels-idx1-ubyte.gz", labels[:n_train], (n_train,))
    write_idx(out / "t10k-images-idx3-ubyte.gz", images[n_train:], (args.test, 28, 28))
    write_idx(out / "t10k-labels-idx1-ubyte.gz", labels[n_train:], (args.test,))
    print(f"wrote {n_train} train / {args.test} test samples to {out}")


if __name__ == "__main__":
    main()
