"""Dataset generation and ingestion: synthetic blobs, CSV, and IDX files."""

from __future__ import annotations

import csv
import struct

import numpy as np


def make_blobs(
    n_samples: int = 600,
    n_features: int = 8,
    n_classes: int = 3,
    spread: float = 1.0,
    center_radius: float = 4.0,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian blob classification data with centers on a sphere.

    Centers sit away from the origin so bias-free networks can separate
    the classes. Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n_classes, n_features))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    centers = dirs * center_radius
    y = rng.integers(0, n_classes, size=n_samples)
    X = centers[y] + rng.normal(0.0, spread, size=(n_samples, n_features))
    return X, y.astype(np.int64)


def train_test_split(X, y, test_fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    n = len(X)
    order = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    test, train = order[:n_test], order[n_test:]
    return X[train], y[train], X[test], y[test]


def load_csv(path: str) -> tuple[np.ndarray, np.ndarray]:
    """Rows of `label,feature,...`; returns (X, y)."""
    labels, rows = [], []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                labels.append(int(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError as e:
                raise ValueError(f"{path}:{line_no}: bad row ({e})") from None
    if not rows:
        raise ValueError(f"{path}: empty dataset")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{path}: inconsistent feature counts {sorted(widths)}")
    return np.asarray(rows, dtype=np.float64), np.asarray(labels, dtype=np.int64)


_IDX_DTYPES = {
    0x08: np.uint8,
    0x09: np.int8,
    0x0B: ">i2",
    0x0C: ">i4",
    0x0D: ">f4",
    0x0E: ">f8",
}


def load_idx(path: str) -> np.ndarray:
    """Standard big-endian IDX image-archive layout."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[0] != 0 or raw[1] != 0:
        raise ValueError(f"{path}: bad IDX magic")
    type_code, ndim = raw[2], raw[3]
    if type_code not in _IDX_DTYPES:
        raise ValueError(f"{path}: unsupported IDX type code 0x{type_code:02x}")
    dims = struct.unpack(f">{ndim}I", raw[4 : 4 + 4 * ndim])
    data = np.frombuffer(raw, dtype=_IDX_DTYPES[type_code], offset=4 + 4 * ndim)
    expected = int(np.prod(dims))
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} elements, found {data.size}")
    return data.reshape(dims).astype(np.float64)
