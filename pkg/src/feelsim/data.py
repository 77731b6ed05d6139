"""Dataset ingestion, synthetic generation, and non-iid sharding.

MNIST-style IDX files (raw or gzipped) are parsed with strict length
validation. The sharding mode mirrors the biased setup of interest: each
device holds samples from exactly one class.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LabeledDataset",
    "ShardingPlan",
    "IdxFormatError",
    "parse_idx",
    "write_idx",
    "load_idx",
    "load_idx_dataset",
    "shard_single_class",
    "synth_classification",
]

_IDX_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}


class IdxFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # (N, F) float64
    labels: np.ndarray  # (N,) int64 in [0, num_classes)
    num_classes: int

    def __post_init__(self):
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on N")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.num_classes):
            raise ValueError("labels outside [0, num_classes)")

    def __len__(self):
        return self.labels.size


@dataclass(frozen=True)
class ShardingPlan:
    assignment: list  # per-device index arrays into the dataset
    dropped: int  # examples not assigned (class-size remainders)


def parse_idx(data: bytes) -> np.ndarray:
    """Decode an IDX buffer: magic, big-endian dims, then the raw tensor."""
    if len(data) < 4:
        raise IdxFormatError(f"truncated header: {len(data)} bytes at offset 0")
    if data[0] != 0 or data[1] != 0:
        raise IdxFormatError(f"bad magic at offset 0: {data[:2].hex()}")
    dtype_code, ndim = data[2], data[3]
    if dtype_code not in _IDX_DTYPES:
        raise IdxFormatError(f"unsupported dtype 0x{dtype_code:02x} at offset 2")
    dtype = _IDX_DTYPES[dtype_code]
    header_end = 4 + 4 * ndim
    if len(data) < header_end:
        raise IdxFormatError(
            f"truncated dimension list: need {header_end} bytes, have {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header_end])
    expected = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    body = data[header_end:]
    if len(body) != expected:
        raise IdxFormatError(
            f"body length mismatch at offset {header_end}: "
            f"declared {expected} bytes, found {len(body)}")
    return np.frombuffer(body, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))


def write_idx(arr: np.ndarray) -> bytes:
    """Inverse of parse_idx for the supported dtypes (testing and fixtures)."""
    codes = {np.dtype(k.newbyteorder("=")): c for c, k in _IDX_DTYPES.items()}
    native = np.ascontiguousarray(arr)
    if native.dtype not in codes:
        raise IdxFormatError(f"unsupported dtype {native.dtype}")
    code = codes[native.dtype]
    header = bytes([0, 0, code, native.ndim])
    header += struct.pack(f">{native.ndim}I", *native.shape)
    return header + native.astype(_IDX_DTYPES[code]).tobytes()


def load_idx(path) -> np.ndarray:
    """Read an IDX file, transparently handling gzip compression."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


def load_idx_dataset(images_path, labels_path, num_classes: int = 10) -> LabeledDataset:
    """Pair of IDX files -> flattened features in [0, 1] plus labels."""
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError("image and label files disagree on count")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return LabeledDataset(features=features,
                          labels=labels.astype(np.int64),
                          num_classes=num_classes)


def shard_single_class(dataset: LabeledDataset, num_devices: int,
                       rng: np.random.Generator) -> ShardingPlan:
    """Split each class into M/num_classes equal disjoint shards.

    Every device ends up with samples from exactly one class; class-size
    remainders are dropped so all shards of a class have equal size.
    """
    classes = dataset.num_classes
    if num_devices % classes != 0:
        raise ValueError(
            f"num_devices={num_devices} must be divisible by num_classes={classes}")
    per_class = num_devices // classes
    assignment = [None] * num_devices
    dropped = 0
    for c in range(classes):
        idx = np.flatnonzero(dataset.labels == c)
        idx = rng.permutation(idx)
        group = idx.size // per_class
        dropped += idx.size - group * per_class
        for j in range(per_class):
            assignment[c * per_class + j] = np.sort(idx[j * group:(j + 1) * group])
    return ShardingPlan(assignment=assignment, dropped=dropped)


def synth_classification(num_classes: int, per_class: int, dim: int,
                         separation: float, rng: np.random.Generator) -> LabeledDataset:
    """Gaussian blobs: class c at separation * u_c with unit isotropic noise.

    Directions u_c are the standard basis when dim >= num_classes, otherwise
    normalized Gaussian directions drawn first from the given stream.
    """
    if num_classes < 1 or per_class < 1:
        raise ValueError("num_classes and per_class must be positive")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if separation < 0:
        raise ValueError("separation must be nonnegative")
    if dim >= num_classes:
        directions = np.eye(num_classes, dim)
    else:
        directions = rng.standard_normal((num_classes, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    labels = np.repeat(np.arange(num_classes), per_class)
    features = separation * directions[labels] + rng.standard_normal((labels.size, dim))
    return LabeledDataset(features=features, labels=labels, num_classes=num_classes)
