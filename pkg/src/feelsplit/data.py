"""Samples, datasets, IDX ingestion, synthetic blobs and non-IID device partitioning.

Datasets are array-backed: a ``Dataset`` holds an ``(n, F)`` feature matrix with
values in [0, 1] and an ``(n,)`` integer label vector.  Indexing a dataset yields
``Sample`` views, so code that wants per-sample objects can still iterate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

SOURCES = ("synthetic_blobs", "idx_files")


class IdxFormatError(ValueError):
    """Malformed IDX payload; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, path: Path | str, offset: int):
        super().__init__(f"{path}: {message} (byte offset {offset})")
        self.path = str(path)
        self.offset = offset


@dataclass(frozen=True, eq=False)
class Sample:
    features: np.ndarray
    label: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.features, other.features)

    def __hash__(self) -> int:
        return hash((self.label, self.features.tobytes()))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        feats = np.array(self.features, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        if feats.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {feats.shape}")
        if labels.shape != (feats.shape[0],):
            raise ValueError("labels must be 1-D and match the number of feature rows")
        if feats.shape[0] and feats.shape[1] == 0:
            raise ValueError("samples must have at least one feature")
        if not np.all(np.isfinite(feats)) or feats.size and (feats.min() < 0.0 or feats.max() > 1.0):
            raise ValueError("features must be finite and lie in [0, 1]")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        if not samples:
            raise ValueError("cannot build a dataset from zero samples")
        feats = np.stack([np.asarray(s.features, dtype=np.float64) for s in samples])
        return cls(feats, np.array([s.label for s in samples], dtype=np.int64))

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.features[i], int(self.labels[i]))

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield self[i]

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx])

    def multiset(self) -> dict[tuple[bytes, int], int]:
        """Counts of (feature bytes, label); used for conservation checks."""
        out: dict[tuple[bytes, int], int] = {}
        for row, lab in zip(self.features, self.labels):
            key = (row.tobytes(), int(lab))
            out[key] = out.get(key, 0) + 1
        return out


@dataclass(frozen=True, eq=False)
class LocalDataset(Dataset):
    device_id: int = 0

    def __post_init__(self):
        super().__post_init__()
        if len(self) < 1:
            raise ValueError(f"device {self.device_id} has an empty local dataset")


@dataclass(frozen=True)
class GlobalDataSpec:
    source: str = "synthetic_blobs"
    class_count: int = 10
    feature_dim: int = 32
    total_train_samples: int = 6000
    test_fraction: float = 0.2
    noniid_shards_per_device: int = 2
    unbalance_factor: float = 3.0
    seed: int = 0
    cluster_std: float = 0.2
    idx_images: Optional[str] = None
    idx_labels: Optional[str] = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.unbalance_factor < 1.0:
            raise ValueError("unbalance_factor must be >= 1")
        if self.total_train_samples < 1:
            raise ValueError("total_train_samples must be >= 1")
        if self.noniid_shards_per_device < 1:
            raise ValueError("noniid_shards_per_device must be >= 1")
        if self.cluster_std < 0.0:
            raise ValueError("cluster_std must be >= 0")
        if self.source == "idx_files" and not (self.idx_images and self.idx_labels):
            raise ValueError("idx_files source needs idx_images and idx_labels paths")

    @property
    def total_samples(self) -> int:
        """Train plus test sample count implied by the train size and test fraction."""
        return int(round(self.total_train_samples / (1.0 - self.test_fraction)))


# ---------------------------------------------------------------------------
# IDX files


def _read_idx(path: Path | str, magic: int, ndim: int) -> tuple[tuple[int, ...], np.ndarray]:
    raw = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(raw) < 4:
        raise IdxFormatError("truncated header", path, len(raw))
    (found,) = struct.unpack_from(">I", raw, 0)
    if found != magic:
        raise IdxFormatError(f"bad magic number 0x{found:08x}, expected 0x{magic:08x}", path, 0)
    if len(raw) < header:
        raise IdxFormatError("truncated header", path, len(raw))
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    expected = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header < expected:
        raise IdxFormatError(
            f"truncated payload: expected {expected} bytes, found {len(raw) - header}",
            path,
            len(raw),
        )
    payload = np.frombuffer(raw, dtype=np.uint8, count=expected, offset=header)
    return dims, payload.reshape(dims)


def load_idx(images_path: Path | str, labels_path: Path | str) -> Dataset:
    """Read an MNIST-style IDX image/label pair; pixels are scaled to [0, 1]."""
    (count, rows, cols), images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    (n_labels,), labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if count != n_labels:
        # the label count lives at byte 4 of the label file
        raise IdxFormatError(
            f"image/label count mismatch: {count} images vs {n_labels} labels", labels_path, 4
        )
    feats = images.reshape(count, rows * cols).astype(np.float64) / 255.0
    return Dataset(feats, labels.astype(np.int64))


def write_idx(images: np.ndarray, labels: Sequence[int], images_path, labels_path) -> None:
    """Write uint8 images ``(n, rows, cols)`` and labels in IDX layout."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())


# ---------------------------------------------------------------------------
# synthetic data


def generate_blobs(spec: GlobalDataSpec, n: int | None = None) -> Dataset:
    """Gaussian clusters, one per class, clipped to the unit cube.

    ``n`` defaults to ``spec.total_samples``.  Class sizes differ by at most one.
    """
    if spec.source != "synthetic_blobs":
        raise ValueError("generate_blobs needs source = synthetic_blobs")
    n = spec.total_samples if n is None else n
    rng = np.random.default_rng(spec.seed)
    means = rng.uniform(0.0, 1.0, size=(spec.class_count, spec.feature_dim))
    per_class = np.full(spec.class_count, n // spec.class_count)
    per_class[: n % spec.class_count] += 1
    labels = np.repeat(np.arange(spec.class_count), per_class)
    noise = rng.normal(0.0, 1.0, size=(n, spec.feature_dim)) * spec.cluster_std
    feats = np.clip(means[labels] + noise, 0.0, 1.0)
    return Dataset(feats, labels)


def build_global_data(spec: GlobalDataSpec) -> tuple[Dataset, Dataset]:
    """Materialize the source and cut it into (train, test) splits."""
    if spec.source == "synthetic_blobs":
        pool = generate_blobs(spec)
    else:
        pool = load_idx(spec.idx_images, spec.idx_labels)
        if int(pool.labels.max()) >= spec.class_count:
            raise ValueError("IDX labels exceed class_count")
        if pool.feature_dim != spec.feature_dim:
            raise ValueError(
                f"IDX images have {pool.feature_dim} features, config says {spec.feature_dim}"
            )
    total = min(spec.total_samples, len(pool))
    rng = np.random.default_rng([spec.seed, 1])
    order = rng.permutation(len(pool))[:total]
    n_train = min(spec.total_train_samples, total - 1)
    return pool.take(order[:n_train]), pool.take(order[n_train:])


# ---------------------------------------------------------------------------
# device partitioning


def _target_sizes(n: int, devices: int, unbalance: float, rng: np.random.Generator) -> np.ndarray:
    if devices == 1:
        return np.array([n])
    weights = unbalance ** (np.arange(devices) / (devices - 1))
    exact = n * weights / weights.sum()
    sizes = np.floor(exact).astype(np.int64)
    # largest remainder, stable on ties
    short = n - int(sizes.sum())
    sizes[np.argsort(-(exact - sizes), kind="stable")[:short]] += 1
    while sizes.min() < 1:
        sizes[np.argmax(sizes)] -= 1
        sizes[np.argmin(sizes)] += 1
    return sizes[rng.permutation(devices)]


def partition_noniid(data: Dataset, device_count: int, spec: GlobalDataSpec) -> list[LocalDataset]:
    """Label-sorted shard split followed by a size rebalancing towards ``unbalance_factor``."""
    if device_count < 1:
        raise ValueError("device_count must be >= 1")
    shards = device_count * spec.noniid_shards_per_device
    if len(data) < shards:
        raise ValueError(
            f"{len(data)} samples cannot fill {shards} shards "
            f"({device_count} devices x {spec.noniid_shards_per_device})"
        )
    rng = np.random.default_rng([spec.seed, 2])
    shuffled = rng.permutation(len(data))
    by_label = shuffled[np.argsort(data.labels[shuffled], kind="stable")]
    pieces = np.array_split(by_label, shards)
    shard_owner = rng.permutation(shards)
    owned: list[list[int]] = [[] for _ in range(device_count)]
    for pos, shard in enumerate(shard_owner):
        owned[pos % device_count].extend(pieces[shard].tolist())

    targets = _target_sizes(len(data), device_count, spec.unbalance_factor, rng)
    pool: list[int] = []
    for dev in range(device_count):
        surplus = len(owned[dev]) - targets[dev]
        if surplus > 0:
            give = set(rng.choice(len(owned[dev]), size=surplus, replace=False).tolist())
            pool.extend(idx for j, idx in enumerate(owned[dev]) if j in give)
            owned[dev] = [idx for j, idx in enumerate(owned[dev]) if j not in give]
    for dev in range(device_count):
        deficit = targets[dev] - len(owned[dev])
        if deficit > 0:
            owned[dev].extend(pool[:deficit])
            del pool[:deficit]
    assert not pool

    out = []
    for dev, idx in enumerate(owned):
        idx = np.sort(np.asarray(idx, dtype=np.int64))
        out.append(LocalDataset(data.features[idx], data.labels[idx], device_id=dev))
    return out


def with_seed(spec: GlobalDataSpec, seed: int) -> GlobalDataSpec:
    return replace(spec, seed=int(seed))
