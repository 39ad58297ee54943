"""Synthetic dataset generation, CSV ingestion, and node partitioning."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import CsvParseError, InvalidInputError
from .models import LabeledDataset
from .rngutil import derive_rng

KINDS = ("blobs", "xor")
PARTITION_KINDS = ("iid", "dirichlet")
_DIRICHLET_RETRIES = 100


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-class generator: Gaussian blobs or the 2-D xor quadrants."""

    kind: str
    dim: int
    samples: int
    seed: int
    separation: float = 4.0  # blobs: distance between class means
    noise: float = 1.0  # per-coordinate standard deviation

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.dim < 1:
            raise InvalidInputError(f"dim must be >= 1, got {self.dim}")
        if self.kind == "xor" and self.dim != 2:
            raise InvalidInputError("xor clusters are 2-D; dim must be 2")
        if self.samples < 2:
            raise InvalidInputError(f"samples must be >= 2, got {self.samples}")
        if self.noise < 0.0:
            raise InvalidInputError(f"noise must be >= 0, got {self.noise}")


@dataclass(frozen=True)
class PartitionScheme:
    kind: str = "iid"
    shards: int = 1
    alpha: float = 0.5  # dirichlet concentration; small = heterogeneous

    def __post_init__(self):
        if self.kind not in PARTITION_KINDS:
            raise InvalidInputError(
                f"kind must be one of {PARTITION_KINDS}, got {self.kind!r}"
            )
        if self.shards < 1:
            raise InvalidInputError(f"shards must be >= 1, got {self.shards}")
        if self.kind == "dirichlet" and self.alpha <= 0.0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")


def generate(spec: SyntheticSpec) -> LabeledDataset:
    """Deterministic sampling; labels are balanced (blobs within 1 sample)."""
    rng = derive_rng(spec.seed)
    if spec.kind == "blobs":
        ones = spec.samples // 2
        labels = np.concatenate(
            [np.zeros(spec.samples - ones, dtype=np.int64), np.ones(ones, dtype=np.int64)]
        )
        labels = labels[rng.permutation(spec.samples)]
        offset = (spec.separation / 2.0) / np.sqrt(spec.dim)
        centers = np.where(labels[:, None] == 1, offset, -offset)
        features = centers + spec.noise * rng.normal(size=(spec.samples, spec.dim))
        return LabeledDataset(features, labels)
    # xor: quadrant centers, label = sign product of the center
    centers = np.array([(1, 1), (-1, -1), (1, -1), (-1, 1)], dtype=np.float64)
    center_labels = np.array([1, 1, 0, 0], dtype=np.int64)
    assignment = rng.permutation(np.arange(spec.samples) % 4)
    features = centers[assignment] + spec.noise * rng.normal(size=(spec.samples, 2))
    return LabeledDataset(features, center_labels[assignment])


def load_csv(path, label_column: str) -> LabeledDataset:
    """Read a headered numeric CSV; labels must be 0 or 1.

    Rows come back in file order. Any malformed cell raises CsvParseError
    naming the 1-based line (line 1 is the header).
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvParseError(1, "file is empty, expected a header row")
        if label_column not in header:
            raise CsvParseError(1, f"label column {label_column!r} not in header")
        label_idx = header.index(label_column)
        feature_idx = [i for i in range(len(header)) if i != label_idx]
        features, labels = [], []
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvParseError(
                    line, f"expected {len(header)} cells, got {len(row)}"
                )
            raw_label = row[label_idx]
            try:
                label = float(raw_label)
            except ValueError:
                raise CsvParseError(
                    line, f"label {raw_label!r} is not numeric"
                ) from None
            if label not in (0.0, 1.0):
                raise CsvParseError(line, f"label must be 0 or 1, got {raw_label!r}")
            values = []
            for i in feature_idx:
                try:
                    values.append(float(row[i]))
                except ValueError:
                    raise CsvParseError(
                        line,
                        f"non-numeric value {row[i]!r} in column {header[i]!r}",
                    ) from None
            features.append(values)
            labels.append(int(label))
    width = len(header) - 1
    matrix = np.array(features, dtype=np.float64).reshape(len(features), width)
    return LabeledDataset(matrix, np.array(labels, dtype=np.int64))


def save_csv(data: LabeledDataset, path, label_column: str = "label") -> None:
    """Write the dataset with repr-formatted floats so a reload is exact."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(data.dim)] + [label_column])
        for row, label in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [str(int(label))])


def partition(data: LabeledDataset, scheme: PartitionScheme, seed: int) -> list[LabeledDataset]:
    """Split into disjoint shards whose union is the input; deterministic."""
    k = scheme.shards
    if data.count < k:
        raise InvalidInputError(f"cannot split {data.count} samples into {k} shards")
    rng = derive_rng(seed)
    if scheme.kind == "iid":
        parts = np.array_split(rng.permutation(data.count), k)
        return [data.subset(p) for p in parts]
    # dirichlet: per-class shard proportions, resampled until nothing is empty
    classes = np.unique(data.labels)
    for _ in range(_DIRICHLET_RETRIES):
        shard_indices = [[] for _ in range(k)]
        for cls in classes:
            idx = rng.permutation(np.flatnonzero(data.labels == cls))
            proportions = rng.dirichlet(np.full(k, scheme.alpha))
            cuts = np.round(np.cumsum(proportions) * idx.size).astype(int)[:-1]
            for shard, chunk in enumerate(np.split(idx, cuts)):
                shard_indices[shard].extend(chunk.tolist())
        if all(shard_indices):
            return [data.subset(np.array(s, dtype=np.intp)) for s in shard_indices]
    raise InvalidInputError(
        f"dirichlet split left an empty shard after {_DIRICHLET_RETRIES} retries"
    )
