#!/usr/bin/env python3
"""Prepare the IDX image files the benchmark loaders read.

If the four MNIST-format files already exist in the target directory they are
left untouched. Otherwise the script builds a drop-in substitute from
scikit-learn's bundled handwritten-digits dataset (1797 samples, 8x8),
bilinearly upscaled to 28x28 and split per class into train/test. The files
use the standard IDX encoding: big-endian headers, magic 0x00000803 for
images and 0x00000801 for labels.

Usage: prepare_data.py [target_dir]   (default: ./data)
"""

import struct
import sys
from pathlib import Path

import numpy as np

FILES = (
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
)

TEST_PER_CLASS = 30
SIDE = 28


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def upscale_bilinear(img: np.ndarray, side: int) -> np.ndarray:
    src = img.astype(np.float64)
    h, w = src.shape
    ys = (np.arange(side) + 0.5) * h / side - 0.5
    xs = (np.arange(side) + 0.5) * w / side - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, w - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = src[np.ix_(y0, x0)] * (1 - wx) + src[np.ix_(y0, x1)] * wx
    bot = src[np.ix_(y1, x0)] * (1 - wx) + src[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def main() -> int:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("data")
    target.mkdir(parents=True, exist_ok=True)

    if all((target / name).exists() for name in FILES):
        print(f"{target}: IDX files already present, nothing to do")
        return 0

    from sklearn.datasets import load_digits

    digits = load_digits()
    images = np.stack(
        [upscale_bilinear(img, SIDE) for img in digits.images]
    )
    # 8x8 digits use intensity 0..16; rescale to the usual 0..255 byte range.
    images = np.clip(np.rint(images * (255.0 / 16.0)), 0, 255).astype(np.uint8)
    labels = digits.target.astype(np.uint8)

    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        test_idx.extend(members[:TEST_PER_CLASS])
        train_idx.extend(members[TEST_PER_CLASS:])
    train_idx = np.sort(np.array(train_idx))
    test_idx = np.sort(np.array(test_idx))

    write_idx_images(target / FILES[0], images[train_idx])
    write_idx_labels(target / FILES[1], labels[train_idx])
    write_idx_images(target / FILES[2], images[test_idx])
    write_idx_labels(target / FILES[3], labels[test_idx])

    print(
        f"{target}: wrote digits-derived IDX files "
        f"({len(train_idx)} train, {len(test_idx)} test, {SIDE}x{SIDE})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
