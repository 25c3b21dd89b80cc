"""Dataset loading, synthesis, splitting, and per-fold standardization."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np


class DatasetError(ValueError):
    """Raised when input data violates the dataset contract."""


@dataclass(frozen=True)
class Dataset:
    """Immutable n x d feature table with stable ids and optional class labels.

    Labels, when present, are contiguous 0-based class indices. Instances
    are addressed by row position everywhere in this package; `ids` exist
    for display and round-tripping external files.
    """

    features: np.ndarray
    ids: tuple[str, ...]
    labels: Optional[np.ndarray] = None
    num_classes: Optional[int] = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {feats.shape}")
        n, d = feats.shape
        if n < 3:
            raise DatasetError(f"need at least 3 instances, got {n}")
        if d < 1:
            raise DatasetError("need at least 1 feature")
        if not np.isfinite(feats).all():
            raise DatasetError("non-finite feature value")
        object.__setattr__(self, "features", feats)
        if len(self.ids) != n:
            raise DatasetError(f"{len(self.ids)} ids for {n} rows")
        if len(set(self.ids)) != n:
            raise DatasetError("duplicate ids")
        object.__setattr__(self, "ids", tuple(str(x) for x in self.ids))
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (n,):
                raise DatasetError(f"labels shape {labels.shape} != ({n},)")
            if self.num_classes is None or self.num_classes < 2:
                raise DatasetError("num_classes must be >= 2 when labels are present")
            if labels.min() < 0 or labels.max() >= self.num_classes:
                raise DatasetError("label outside [0, num_classes)")
            object.__setattr__(self, "labels", labels)
        elif self.num_classes is not None:
            raise DatasetError("num_classes given without labels")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def view(self, indices: np.ndarray) -> "DatasetView":
        return DatasetView(self, np.asarray(indices, dtype=np.intp))


@dataclass(frozen=True)
class DatasetView:
    """Read-only window onto a subset of a dataset's rows.

    Triplets, constraints, and cluster assignments elsewhere in the package
    use view-local positions 0..len(view)-1.
    """

    dataset: Dataset
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp)
        if idx.ndim != 1 or len(idx) == 0:
            raise DatasetError("view needs a non-empty 1-D index array")
        if idx.min() < 0 or idx.max() >= self.dataset.n:
            raise DatasetError("view index out of range")
        object.__setattr__(self, "indices", idx)

    @cached_property
    def features(self) -> np.ndarray:
        return self.dataset.features[self.indices]

    @cached_property
    def labels(self) -> Optional[np.ndarray]:
        if self.dataset.labels is None:
            return None
        return self.dataset.labels[self.indices]

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self.dataset.ids[i] for i in self.indices)

    @property
    def num_classes(self) -> Optional[int]:
        return self.dataset.num_classes

    @property
    def dim(self) -> int:
        return self.dataset.dim

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class Split:
    """Disjoint train/test partition of dataset row indices."""

    train_indices: np.ndarray
    test_indices: np.ndarray

    def __post_init__(self):
        tr = np.asarray(self.train_indices, dtype=np.intp)
        te = np.asarray(self.test_indices, dtype=np.intp)
        if len(tr) == 0 or len(te) == 0:
            raise DatasetError("both folds must be nonempty")
        if set(tr) & set(te):
            raise DatasetError("train and test folds overlap")
        object.__setattr__(self, "train_indices", np.sort(tr))
        object.__setattr__(self, "test_indices", np.sort(te))


def load_csv(
    path: str | Path,
    label_column: Optional[str] = None,
    id_column: Optional[str] = None,
) -> Dataset:
    """Load a headered CSV of numeric features, with optional label/id columns.

    Label values are treated as categorical strings and mapped to class
    indices 0..C-1 in sorted order of the distinct raw values, so the
    encoding is stable across runs.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    special = {}
    for name, col in (("label", label_column), ("id", id_column)):
        if col is not None:
            if col not in header:
                raise DatasetError(f"{path}: no column named {col!r}")
            special[name] = header.index(col)
    feature_cols = [c for c in range(len(header)) if c not in special.values()]
    if not feature_cols:
        raise DatasetError(f"{path}: no feature columns left")

    feats = np.empty((len(rows), len(feature_cols)), dtype=np.float64)
    raw_labels, ids = [], []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        for out_c, c in enumerate(feature_cols):
            try:
                feats[r, out_c] = float(row[c])
            except ValueError:
                raise DatasetError(
                    f"{path}: cannot parse {row[c]!r} in column {header[c]!r}, row {r + 2}"
                ) from None
        if "label" in special:
            raw_labels.append(row[special["label"]].strip())
        ids.append(row[special["id"]].strip() if "id" in special else str(r))

    if not np.isfinite(feats).all():
        raise DatasetError(f"{path}: non-finite feature")
    if len(rows) < 3:
        raise DatasetError(f"{path}: fewer than 3 rows")

    labels = num_classes = None
    if label_column is not None:
        classes = sorted(set(raw_labels))
        if len(classes) < 2:
            raise DatasetError(f"{path}: label column has {len(classes)} distinct value(s), need >= 2")
        index = {c: i for i, c in enumerate(classes)}
        labels = np.array([index[v] for v in raw_labels], dtype=np.int64)
        num_classes = len(classes)

    return Dataset(features=feats, ids=tuple(ids), labels=labels, num_classes=num_classes)


def save_csv(dataset: Dataset, path: str | Path, label_column: str = "class") -> None:
    """Write a dataset as a headered CSV that load_csv can round-trip."""
    path = Path(path)
    d = dataset.dim
    header = [f"f{c}" for c in range(d)]
    if dataset.labels is not None:
        header.append(label_column)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in range(dataset.n):
            row = [repr(float(v)) for v in dataset.features[r]]
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[r])))
            writer.writerow(row)


def make_synthetic_gaussians(
    num_classes: int,
    per_class: int,
    dim: int,
    informative_dims: int,
    separation: float,
    seed: int,
) -> Dataset:
    """Gaussian class blobs whose means differ only on the leading dimensions.

    Class c has mean c * separation on each of the first `informative_dims`
    coordinates; all remaining coordinates are standard normal noise shared
    identically across classes. Deterministic for a given seed.
    """
    if num_classes < 2 or per_class < 1:
        raise DatasetError("need num_classes >= 2 and per_class >= 1")
    if not (1 <= informative_dims <= dim):
        raise DatasetError("need 1 <= informative_dims <= dim")
    if separation <= 0:
        raise DatasetError("separation must be positive")
    n = num_classes * per_class
    if n < 3:
        raise DatasetError("need at least 3 instances in total")

    rng = np.random.default_rng(seed)
    feats = rng.standard_normal((n, dim))
    labels = np.repeat(np.arange(num_classes), per_class)
    feats[:, :informative_dims] += separation * labels[:, None]
    return Dataset(
        features=feats,
        ids=tuple(str(i) for i in range(n)),
        labels=labels.astype(np.int64),
        num_classes=num_classes,
    )


def split(dataset: Dataset, test_fraction: float, seed: int) -> Split:
    """Deterministic train/test partition, stratified by class when labels exist."""
    if not (0.0 < test_fraction < 1.0):
        raise DatasetError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    test: list[int] = []
    if dataset.labels is not None:
        for c in range(dataset.num_classes):
            members = np.flatnonzero(dataset.labels == c)
            perm = rng.permutation(members)
            n_test = int(len(members) * test_fraction + 0.5)
            test.extend(perm[:n_test].tolist())
    else:
        perm = rng.permutation(dataset.n)
        n_test = int(dataset.n * test_fraction + 0.5)
        test.extend(perm[:n_test].tolist())
    test_set = set(test)
    if not test_set or len(test_set) == dataset.n:
        raise DatasetError("both folds must be nonempty after rounding")
    train = [i for i in range(dataset.n) if i not in test_set]
    return Split(train_indices=np.array(train), test_indices=np.array(sorted(test)))


def standardize(dataset: Dataset, spl: Split) -> Dataset:
    """Z-score every feature using statistics of the training fold only.

    The same affine transform is applied to all rows, so test instances are
    scaled exactly as a deployed model would see them. Constant features on
    the training fold are left centered with unit divisor.
    """
    train = dataset.features[spl.train_indices]
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    std[std == 0.0] = 1.0
    feats = (dataset.features - mean) / std
    return Dataset(
        features=feats,
        ids=dataset.ids,
        labels=dataset.labels,
        num_classes=dataset.num_classes,
    )
