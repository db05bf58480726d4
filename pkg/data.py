# data.py
# © 2025 Colt McVey
# Sample sources: synthetic multiclass clusters, IDX (MNIST-style) files and keyed sample streams.

import struct
import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist
from sklearn.datasets import make_blobs
from sklearn.preprocessing import minmax_scale

from errors import (
    InvalidParam, EmptyDataset, SamplerExhausted,
    BadMagic, TruncatedFile, CountMismatch,
)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class SampleBatch:
    """A slice of samples: feature rows plus (optional) class labels."""
    inputs: np.ndarray
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def head(self, count: int) -> "SampleBatch":
        return SampleBatch(self.inputs[:count], None if self.labels is None else self.labels[:count])

    def tail(self, start: int) -> "SampleBatch":
        return SampleBatch(self.inputs[start:], None if self.labels is None else self.labels[start:])

    @classmethod
    def concat(cls, batches: list["SampleBatch"]) -> "SampleBatch":
        inputs = np.vstack([b.inputs for b in batches])
        if any(b.labels is None for b in batches):
            return cls(inputs)
        return cls(inputs, np.concatenate([b.labels for b in batches]))


@dataclass(frozen=True)
class Dataset:
    """
    N samples with features scaled into [0, 1] and labels in [0, M).
    Arrays are made read-only on construction.
    """
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float)
        labels = np.array(self.labels, dtype=np.int64)
        if inputs.ndim != 2 or inputs.shape[0] == 0:
            raise EmptyDataset(f"Dataset needs at least one sample row, got shape {inputs.shape}")
        if labels.shape != (inputs.shape[0],):
            raise CountMismatch(f"{inputs.shape[0]} inputs but {labels.shape} labels")
        if labels.min() < 0 or labels.max() >= self.num_classes:
            raise InvalidParam(f"Labels must lie in [0, {self.num_classes})")
        if inputs.min() < 0.0 or inputs.max() > 1.0:
            raise InvalidParam("Features must be scaled into [0, 1]")
        inputs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def take(self, indices: np.ndarray) -> SampleBatch:
        return SampleBatch(self.inputs[indices], self.labels[indices])

    def as_batch(self) -> SampleBatch:
        return SampleBatch(self.inputs, self.labels)

    def checksum(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.inputs).tobytes())
        digest.update(np.ascontiguousarray(self.labels).tobytes())
        return digest.hexdigest()

    def manifest(self) -> dict:
        return {"N": self.size, "d": self.dim, "M": self.num_classes, "checksum": self.checksum()}


def generate_synthetic(M: int, d: int, N: int, separation: float, seed: int,
                       noise: float = 1.0) -> Dataset:
    """
    Gaussian class clusters whose centers sit at pairwise distance >= separation
    before the per-feature rescaling to [0, 1]. Class sizes differ by at most one.
    """
    if M < 2 or d < 1 or N < M:
        raise InvalidParam(f"Need M >= 2, d >= 1 and N >= M (got M={M}, d={d}, N={N})")
    if separation <= 0 or noise < 0:
        raise InvalidParam(f"separation must be positive and noise nonnegative (got {separation}, {noise})")

    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(M, d))
    closest = pdist(centers).min()
    while closest <= 0:
        centers = rng.normal(size=(M, d))
        closest = pdist(centers).min()
    centers *= separation / closest

    counts = [N // M + (1 if c < N % M else 0) for c in range(M)]
    inputs, labels = make_blobs(
        n_samples=counts, centers=centers, cluster_std=noise, random_state=seed, shuffle=True
    )
    inputs = np.clip(minmax_scale(inputs, feature_range=(0.0, 1.0)), 0.0, 1.0)
    return Dataset(inputs, labels, M)


def _read_be32(data: bytes, offset: int, path: Path) -> int:
    if len(data) < offset + 4:
        raise TruncatedFile(f"{path}: header ends after {len(data)} bytes")
    return struct.unpack_from('>I', data, offset)[0]


def _read_idx_images(path: Path) -> np.ndarray:
    # Data format (big endian):
    # u32 | Magic 0x00000803
    # u32 | Item count
    # u32 | Row count
    # u32 | Column count
    # u8[] | Pixels (row-major)
    data = path.read_bytes()
    magic = _read_be32(data, 0, path)
    if magic != IDX_IMAGES_MAGIC:
        raise BadMagic(f"{path}: magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    count, rows, cols = (_read_be32(data, off, path) for off in (4, 8, 12))
    needed = count * rows * cols
    if len(data) - 16 < needed:
        raise TruncatedFile(f"{path}: expected {needed} pixel bytes, found {len(data) - 16}")
    return np.frombuffer(data, dtype=np.uint8, count=needed, offset=16).reshape(count, rows * cols)


def _read_idx_labels(path: Path) -> np.ndarray:
    # u32 | Magic 0x00000801
    # u32 | Item count
    # u8[] | Labels
    data = path.read_bytes()
    magic = _read_be32(data, 0, path)
    if magic != IDX_LABELS_MAGIC:
        raise BadMagic(f"{path}: magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    count = _read_be32(data, 4, path)
    if len(data) - 8 < count:
        raise TruncatedFile(f"{path}: expected {count} label bytes, found {len(data) - 8}")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=8)


def read_idx(images_path: str | Path, labels_path: str | Path, num_classes: int | None = None) -> Dataset:
    """
    Reads an IDX image/label file pair. Pixels are scaled by 1/255.

    Args:
        images_path: File with magic 0x00000803.
        labels_path: File with magic 0x00000801.
        num_classes: Class count M; defaults to the largest label plus one.
    """
    images_path, labels_path = Path(images_path), Path(labels_path)
    pixels = _read_idx_images(images_path)
    labels = _read_idx_labels(labels_path)
    if pixels.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images_path} holds {pixels.shape[0]} images but {labels_path} holds {labels.shape[0]} labels")
    if pixels.shape[0] == 0:
        raise EmptyDataset(f"{images_path} contains no images")
    M = num_classes if num_classes is not None else int(labels.max()) + 1
    logging.info(f"Loaded {pixels.shape[0]} samples of dimension {pixels.shape[1]} from {images_path.name}")
    return Dataset(pixels.astype(float) / 255.0, labels.astype(np.int64), M)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path: str | Path, labels_path: str | Path):
    """Writes uint8 images of shape (N, rows, cols) and their labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3:
        raise InvalidParam(f"Images must have shape (N, rows, cols), got {images.shape}")
    count, rows, cols = images.shape
    with open(images_path, 'wb') as f:
        f.write(struct.pack('>IIII', IDX_IMAGES_MAGIC, count, rows, cols))
        f.write(images.tobytes(order='C'))
    with open(labels_path, 'wb') as f:
        f.write(struct.pack('>II', IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


class SampleStream:
    """
    Draws samples uniformly with replacement. Every (seed, round, node) key
    owns its own generator, so draws do not depend on call order.
    An optional budget caps the total number of samples handed out.
    """
    def __init__(self, dataset: Dataset, seed: int, budget: int | None = None):
        self.dataset = dataset
        self.seed = seed
        self.mode = "with_replacement"
        self.budget = budget
        self.drawn = 0

    def indices(self, round_t: int, node: int, count: int) -> np.ndarray:
        if count < 1:
            raise InvalidParam(f"count must be at least 1, got {count}")
        rng = np.random.default_rng([self.seed, round_t, node])
        return rng.integers(0, self.dataset.size, size=count)

    def draw(self, round_t: int, node: int, count: int) -> SampleBatch:
        if self.budget is not None and self.drawn + count > self.budget:
            raise SamplerExhausted(f"Sample budget of {self.budget} exhausted at round {round_t}, node {node}")
        batch = self.dataset.take(self.indices(round_t, node, count))
        self.drawn += count
        return batch


def draw(stream: SampleStream, round_t: int, node: int, count: int) -> SampleBatch:
    return stream.draw(round_t, node, count)
