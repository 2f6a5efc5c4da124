#!/usr/bin/env python3
"""Materialize MNIST (IDX) and CIFAR-10 (binary batches) under a data root.

Sources are npm packages that redistribute the original datasets:
  mnist-data    -> the four MNIST IDX files, copied verbatim
  tfjs-cifar10  -> CIFAR-10 as PNG strips (one 32x32 image per row) plus
                   label JSON, re-encoded into the 3073-byte record format
"""
import argparse
import json
import os
import shutil
import subprocess
import tarfile
import tempfile

import numpy as np
from PIL import Image


def npm_pack(name, workdir):
    out = subprocess.run(["npm", "pack", name, "--silent"], cwd=workdir,
                         check=True, capture_output=True, text=True)
    tgz = os.path.join(workdir, out.stdout.strip().splitlines()[-1])
    dest = os.path.join(workdir, name)
    with tarfile.open(tgz) as tf:
        tf.extractall(dest)
    return os.path.join(dest, "package")


def fetch_mnist(root, workdir):
    dst = os.path.join(root, "mnist")
    os.makedirs(dst, exist_ok=True)
    pkg = npm_pack("mnist-data", workdir)
    for f in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
              "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"):
        shutil.copyfile(os.path.join(pkg, "data", f), os.path.join(dst, f))


def write_cifar_batch(png, labels, path):
    img = np.asarray(Image.open(png).convert("RGB"), dtype=np.uint8)
    # (N images, 1024 pixels, 3) -> (N, 3, 1024)
    planar = np.transpose(img, (0, 2, 1))
    assert planar.shape[0] == len(labels)
    rec = np.empty((len(labels), 3073), dtype=np.uint8)
    rec[:, 0] = np.asarray(labels, dtype=np.uint8)
    rec[:, 1:] = planar.reshape(len(labels), 3072)
    rec.tofile(path)


def fetch_cifar10(root, workdir):
    dst = os.path.join(root, "cifar-10-batches-bin")
    os.makedirs(dst, exist_ok=True)
    pkg = npm_pack("tfjs-cifar10", workdir)
    with open(os.path.join(pkg, "train_lables.json")) as f:
        train = json.load(f)
    with open(os.path.join(pkg, "test_lables.json")) as f:
        test = json.load(f)
    for i in range(5):
        write_cifar_batch(os.path.join(pkg, f"data_batch_{i + 1}.png"),
                          train[i * 10000:(i + 1) * 10000],
                          os.path.join(dst, f"data_batch_{i + 1}.bin"))
    write_cifar_batch(os.path.join(pkg, "test_batch.png"), test,
                      os.path.join(dst, "test_batch.bin"))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--root", default=os.environ.get("QAT_DATA_DIR", "/root/data"))
    ap.add_argument("--only", choices=["mnist", "cifar10"])
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as work:
        if args.only in (None, "mnist"):
            fetch_mnist(args.root, work)
        if args.only in (None, "cifar10"):
            fetch_cifar10(args.root, work)
    print(f"datasets written under {args.root}")


if __name__ == "__main__":
    main()
