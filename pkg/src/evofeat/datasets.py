"""Tabular datasets, the stratified 40/40/20 split, and synthetic generators."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    ClassTooSmallError,
    EmptyFileError,
    MissingLabelColumnError,
    NonNumericCellError,
)
from .validation import ensure_rng

TRAIN_SHARE = 0.4
VALIDATION_SHARE = 0.4


@dataclass(frozen=True)
class Dataset:
    """Immutable labeled table: n x d features plus integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on row count")
        if len(self.column_names) != self.features.shape[1]:
            raise ValueError("column_names must match feature count")
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_columns(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[indices].copy(), self.labels[indices].copy(),
                       self.column_names)


@dataclass(frozen=True)
class SplitDataset:
    """Disjoint train/validation/test partition of one dataset."""

    train: Dataset
    validation: Dataset
    test: Dataset
    split_seed: int
    train_indices: np.ndarray
    validation_indices: np.ndarray
    test_indices: np.ndarray


def load_csv(path, label_column: str) -> Dataset:
    """Load a UTF-8 CSV with a header row into a Dataset.

    Feature cells must be numeric. Label values (categorical or numeric) are
    re-encoded to 0..c-1 in order of first appearance; feature column order
    is preserved.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        raise EmptyFileError(f"{path} contains no data")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise MissingLabelColumnError(
            f"label column {label_column!r} not found in {header}")
    if len(rows) < 2:
        raise EmptyFileError(f"{path} has a header but no data rows")

    label_idx = header.index(label_column)
    feature_names = tuple(name for i, name in enumerate(header) if i != label_idx)

    label_codes: dict[str, int] = {}
    features = np.empty((len(rows) - 1, len(feature_names)), dtype=np.float64)
    labels = np.empty(len(rows) - 1, dtype=np.int64)
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise NonNumericCellError(r, header[min(len(row), len(header)) - 1],
                                      "<missing cell>")
        c_out = 0
        for c, cell in enumerate(row):
            cell = cell.strip()
            if c == label_idx:
                if cell not in label_codes:
                    label_codes[cell] = len(label_codes)
                labels[r - 1] = label_codes[cell]
                continue
            try:
                features[r - 1, c_out] = float(cell)
            except ValueError:
                raise NonNumericCellError(r, header[c], cell) from None
            if not np.isfinite(features[r - 1, c_out]):
                raise NonNumericCellError(r, header[c], cell)
            c_out += 1

    if len(label_codes) < 2:
        raise ClassTooSmallError("dataset must contain at least 2 distinct labels")
    return Dataset(features, labels, feature_names)


def save_csv(dataset: Dataset, path, label_column: str = "label"):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.column_names) + [label_column])
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])


# --------------------------------------------------------------------------
# stratified splitting
# --------------------------------------------------------------------------

def _largest_remainder(total: int, weights: np.ndarray, denom: int,
                       caps: np.ndarray | None = None) -> np.ndarray:
    """Integer apportionment of ``total`` proportional to weights/denom."""
    base = (total * weights) // denom
    rem_keys = (total * weights) % denom
    if caps is not None:
        base = np.minimum(base, caps)
    leftover = total - int(base.sum())
    order = np.lexsort((np.arange(len(weights)), -rem_keys))
    while leftover > 0:
        progressed = False
        for i in order:
            if leftover == 0:
                break
            if caps is None or base[i] < caps[i]:
                base[i] += 1
                leftover -= 1
                progressed = True
        if not progressed:
            raise RuntimeError("apportionment failed to place all rows")
    return base.astype(np.int64)


def _split_counts(class_sizes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class train/validation/test counts: exact global 40/40/20 sizes
    with every class within one row of its proportional share."""
    n_train = (4 * n + 5) // 10          # round(0.4 n), exact in integers
    n_val = (4 * n + 5) // 10
    n_test = n - n_train - n_val
    t = _largest_remainder(n_train, class_sizes, n)
    v = _largest_remainder(n_val, class_sizes, n, caps=class_sizes - t)

    # exact quota box for each class's validation count, accounting for the
    # box the implied test count must land in as well
    floor_v, ceil_v = (n_val * class_sizes) // n, -((-n_val * class_sizes) // n)
    floor_s, ceil_s = (n_test * class_sizes) // n, -((-n_test * class_sizes) // n)
    lo = np.maximum(floor_v, class_sizes - t - ceil_s)
    hi = np.minimum(ceil_v, class_sizes - t - floor_s)
    for _ in range(int(np.abs(v - (lo + hi) / 2).sum()) + 2 * len(class_sizes) + 4):
        over = np.nonzero(v > hi)[0]
        under = np.nonzero(v < lo)[0]
        if over.size == 0 and under.size == 0:
            break
        if over.size:
            i = over[0]
            room = under if under.size else np.nonzero(v < hi)[0]
        else:
            room = under
            i = np.nonzero(v > lo)[0][0]
        j = room[0]
        v[i] -= 1
        v[j] += 1
    else:
        raise RuntimeError("stratified allocation did not converge")
    s = class_sizes - t - v
    return t, v, s


def split(dataset: Dataset, seed: int) -> SplitDataset:
    """Deterministic stratified 40/40/20 partition of the dataset rows."""
    rng = ensure_rng(seed)
    y = dataset.labels
    classes = np.unique(y)
    class_rows = [np.nonzero(y == c)[0] for c in classes]
    sizes = np.array([rows.size for rows in class_rows], dtype=np.int64)
    if sizes.min() < 3:
        smallest = classes[int(np.argmin(sizes))]
        raise ClassTooSmallError(
            f"class {smallest} has only {sizes.min()} rows; need >= 3 per class")

    t, v, _ = _split_counts(sizes, dataset.n_rows)
    train_idx, val_idx, test_idx = [], [], []
    for rows, n_t, n_v in zip(class_rows, t, v):
        shuffled = rows[rng.permutation(rows.size)]
        train_idx.append(shuffled[:n_t])
        val_idx.append(shuffled[n_t:n_t + n_v])
        test_idx.append(shuffled[n_t + n_v:])
    train_idx = np.sort(np.concatenate(train_idx))
    val_idx = np.sort(np.concatenate(val_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return SplitDataset(
        train=dataset.subset(train_idx),
        validation=dataset.subset(val_idx),
        test=dataset.subset(test_idx),
        split_seed=int(seed),
        train_indices=train_idx,
        validation_indices=val_idx,
        test_indices=test_idx,
    )


def save_split_manifest(split_ds: SplitDataset, path):
    payload = {
        "seed": split_ds.split_seed,
        "train": [int(i) for i in split_ds.train_indices],
        "validation": [int(i) for i in split_ds.validation_indices],
        "test": [int(i) for i in split_ds.test_indices],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_split_manifest(dataset: Dataset, path) -> SplitDataset:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    train_idx = np.asarray(payload["train"], dtype=np.int64)
    val_idx = np.asarray(payload["validation"], dtype=np.int64)
    test_idx = np.asarray(payload["test"], dtype=np.int64)
    return SplitDataset(
        train=dataset.subset(train_idx),
        validation=dataset.subset(val_idx),
        test=dataset.subset(test_idx),
        split_seed=int(payload["seed"]),
        train_indices=train_idx,
        validation_indices=val_idx,
        test_indices=test_idx,
    )


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------

def synth_interaction(n: int, noise_rate: float = 0.0, seed: int = 0) -> Dataset:
    """Six standard-normal columns; the label is sign(x0 * x1), noise-flipped.

    No single axis-parallel threshold separates the classes, but the product
    x0 * x1 does, which makes this a useful oracle for construction methods.
    """
    if n < 100:
        raise ValueError(f"need n >= 100, got {n}")
    if not 0.0 <= noise_rate <= 1.0:
        raise ValueError("noise_rate must be in [0, 1]")
    rng = ensure_rng(seed)
    X = rng.standard_normal((n, 6))
    y = (X[:, 0] * X[:, 1] > 0).astype(np.int64)
    flips = rng.random(n) < noise_rate
    y = np.where(flips, 1 - y, y)
    return Dataset(X, y, tuple(f"x{i}" for i in range(6)))
