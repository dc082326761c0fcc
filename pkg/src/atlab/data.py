"""Dataset construction, IDX file IO, batching, and metrics file emission.

Features always live in [0, 1] after construction; labels are integers in
[0, C).  The synthetic generator is the default workload; the IDX container
(the classic ubyte image format with big-endian dims) covers small real
datasets without extra dependencies.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Dataset",
    "gen_gaussian_blobs",
    "load_idx_dataset",
    "read_idx",
    "write_idx",
    "batch_iter",
    "subsample",
    "emit_metrics",
    "load_metrics",
    "IdxFormatError",
    "IdxBadMagic",
    "IdxTruncated",
    "IdxCountMismatch",
]


class IdxFormatError(ValueError):
    """Base class for malformed IDX input."""


class IdxBadMagic(IdxFormatError):
    pass


class IdxTruncated(IdxFormatError):
    pass


class IdxCountMismatch(IdxFormatError):
    pass


@dataclass
class Dataset:
    features: np.ndarray  # (N, d) float64 in [0, 1]
    labels: np.ndarray    # (N,) int
    name: str = "dataset"
    normalization: str = "unit-interval"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2:
            raise ValueError(f"Dataset: features must be 2-D, got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError(
                f"Dataset: labels shape {self.labels.shape} does not match "
                f"features {self.features.shape}"
            )
        if self.features.size and (self.features.min() < 0.0 or self.features.max() > 1.0):
            raise ValueError("Dataset: features must lie in [0, 1]")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) else 0


def gen_gaussian_blobs(classes: int, d: int, n_per_class: int, spread: float,
                       seed: int, name: str = "blobs") -> Dataset:
    """Isotropic Gaussian clusters at one-hot simplex vertices in [0.2, 0.8]^d.

    Class c is centered at 0.2 + 0.6 * e_c, so the class layout is
    deterministic; only the per-sample draws use the seed.  Samples are
    clamped into [0, 1].  Requires d >= classes so each class owns a vertex.
    """
    if classes < 2:
        raise ValueError(f"gen_gaussian_blobs: classes must be >= 2, got {classes}")
    if d < 2:
        raise ValueError(f"gen_gaussian_blobs: d must be >= 2, got {d}")
    if d < classes:
        raise ValueError(f"gen_gaussian_blobs: need d >= classes, got d={d}, classes={classes}")
    if n_per_class < 1:
        raise ValueError(f"gen_gaussian_blobs: n_per_class must be >= 1, got {n_per_class}")
    if spread <= 0:
        raise ValueError(f"gen_gaussian_blobs: spread must be positive, got {spread}")
    rng = np.random.default_rng(seed)
    means = np.full((classes, d), 0.2)
    means[np.arange(classes), np.arange(classes)] = 0.8
    feats = np.empty((classes * n_per_class, d))
    labels = np.repeat(np.arange(classes), n_per_class)
    for c in range(classes):
        block = slice(c * n_per_class, (c + 1) * n_per_class)
        feats[block] = means[c] + spread * rng.standard_normal(size=(n_per_class, d))
    np.clip(feats, 0.0, 1.0, out=feats)
    return Dataset(feats, labels, name=name)


def read_idx(path) -> np.ndarray:
    """Read one IDX file (unsigned-byte payload) into an ndarray."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4:
        raise IdxTruncated(f"{path}: file shorter than the 4-byte IDX header")
    zero0, zero1, dtype_byte, ndims = blob[0], blob[1], blob[2], blob[3]
    if zero0 != 0 or zero1 != 0:
        raise IdxBadMagic(f"{path}: IDX magic must start with two zero bytes")
    if dtype_byte != 0x08:
        raise IdxBadMagic(f"{path}: only unsigned-byte IDX payloads supported, got type 0x{dtype_byte:02x}")
    header_len = 4 + 4 * ndims
    if len(blob) < header_len:
        raise IdxTruncated(f"{path}: truncated inside the dims header")
    dims = struct.unpack(f">{ndims}I", blob[4:header_len])
    count = int(np.prod(dims)) if dims else 0
    if len(blob) != header_len + count:
        raise IdxTruncated(
            f"{path}: payload has {len(blob) - header_len} bytes, dims {dims} need {count}"
        )
    return np.frombuffer(blob, dtype=np.uint8, offset=header_len).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    """Write an unsigned-byte ndarray in IDX layout (big-endian dims)."""
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(bytes([0, 0, 0x08, arr.ndim]))
        f.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        f.write(arr.tobytes())


def load_idx_dataset(images_path, labels_path, name: str = "idx") -> Dataset:
    """Load an IDX image/label pair, scaled by 1/255 and flattened row-major."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if labels.ndim != 1:
        raise IdxFormatError(f"{labels_path}: labels must be 1-D, got shape {labels.shape}")
    if images.ndim < 2:
        raise IdxFormatError(f"{images_path}: images must have at least 2 dims, got {images.shape}")
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatch(
            f"label/image count mismatch: {images.shape[0]} images, {labels.shape[0]} labels"
        )
    feats = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(feats, labels.astype(np.int64), name=name, normalization="1/255")


def batch_iter(dataset: Dataset, batch_size: int, epoch_seed: int):
    """Yield (features, labels) batches in a seeded shuffled order.

    The shuffle is a uniform random permutation (Fisher-Yates, as
    implemented by numpy's Generator); the final partial batch is kept.
    """
    if batch_size < 1:
        raise ValueError(f"batch_iter: batch_size must be >= 1, got {batch_size}")
    order = np.random.default_rng(epoch_seed).permutation(len(dataset))
    for start in range(0, len(dataset), batch_size):
        idx = order[start : start + batch_size]
        yield dataset.features[idx], dataset.labels[idx]


def subsample(dataset: Dataset, k: int, seed: int) -> Dataset:
    """A fixed random subset of k samples (the whole set when k >= N)."""
    if k >= len(dataset):
        return dataset
    idx = np.random.default_rng(seed).choice(len(dataset), size=k, replace=False)
    idx.sort()
    return Dataset(dataset.features[idx], dataset.labels[idx],
                   name=f"{dataset.name}[{k}]", normalization=dataset.normalization)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_metrics(records, path, format: str = "csv") -> None:
    """Write metric records as CSV (stable header order) or a JSON array.

    The header comes from the first record's key order; later records may
    omit keys (empty cells) but must not introduce new ones.
    """
    records = list(records)
    if not records:
        raise ValueError("emit_metrics: records must be nonempty")
    if format == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(records, f, indent=1)
            f.write("\n")
        return
    if format != "csv":
        raise ValueError(f"emit_metrics: unknown format {format!r}")
    header = list(records[0].keys())
    known = set(header)
    lines = [",".join(header)]
    for rec in records:
        extra = set(rec) - known
        if extra:
            raise ValueError(f"emit_metrics: record keys {sorted(extra)} missing from header")
        lines.append(",".join(_format_cell(rec.get(k)) for k in header))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def load_metrics(path) -> list[dict]:
    """Read back a metrics CSV, restoring ints, floats, and empty cells."""
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip() != ""]
    if not lines:
        return []
    header = lines[0].split(",")
    return [
        {k: _parse_cell(v) for k, v in zip(header, ln.split(","))}
        for ln in lines[1:]
    ]
