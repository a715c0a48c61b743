#!/usr/bin/env python3
"""Build the desk-scale MNIST IDX files under data/mnist/.

Source: the `mnist` npm package (10,000 MNIST digits stored as JSON pixel
arrays scaled to [0, 1] with three decimals). Every value is an exact k/255
up to rounding, so the original bytes are recovered with round(v * 255).

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/make_desk_mnist.py package/src/digits data/mnist
"""
import gzip
import json
import os
import struct
import sys

import numpy as np


def write_idx(path, magic, dims, payload):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">I", magic))
        for d in dims:
            f.write(struct.pack(">I", d))
        f.write(payload)


def main(src, dst, n_train=8000):
    images, labels = [], []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as f:
            values = np.asarray(json.load(f)["data"], dtype=np.float64)
        rows = values.reshape(-1, 784)
        images.append(np.rint(rows * 255.0).astype(np.uint8))
        labels.extend([digit] * len(rows))
    images = np.vstack(images)
    labels = np.asarray(labels, dtype=np.uint8)
    order = np.random.default_rng(0).permutation(len(labels))
    images, labels = images[order], labels[order]

    os.makedirs(dst, exist_ok=True)
    splits = {"train": slice(0, n_train), "t10k": slice(n_train, len(labels))}
    for name, sl in splits.items():
        x, y = images[sl], labels[sl]
        write_idx(os.path.join(dst, f"{name}-images-idx3-ubyte.gz"), 0x803, (len(y), 28, 28), x.tobytes())
        write_idx(os.path.join(dst, f"{name}-labels-idx1-ubyte.gz"), 0x801, (len(y),), y.tobytes())
        print(name, len(y), np.bincount(y, minlength=10).tolist())


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
