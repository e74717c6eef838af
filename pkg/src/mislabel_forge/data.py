"""Datasets: synthetic blob generation, CSV ingestion, and stratified k-folds.

CSV layout: UTF-8 with a header row, feature columns f0..f{r-1}, a `label`
column, and an optional `clean_label` column carrying pre-corruption ground
truth. String labels are mapped to contiguous indices in lexicographic order
and the mapping is kept on the dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass
class LabeledDataset:
    """Feature matrix with clean labels, observed labels, and corruption flags."""

    features: np.ndarray
    clean_labels: np.ndarray
    observed_labels: np.ndarray
    corrupted_mask: np.ndarray
    num_classes: int
    label_names: tuple[str, ...] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.clean_labels = np.asarray(self.clean_labels, dtype=np.intp)
        self.observed_labels = np.asarray(self.observed_labels, dtype=np.intp)
        self.corrupted_mask = np.asarray(self.corrupted_mask, dtype=bool)
        n = self.features.shape[0]
        for name in ("clean_labels", "observed_labels", "corrupted_mask"):
            if getattr(self, name).shape != (n,):
                raise ConfigurationError(f"{name} must have shape ({n},)")

    @classmethod
    def from_clean(cls, features, labels, num_classes=None, label_names=None) -> "LabeledDataset":
        labels = np.asarray(labels, dtype=np.intp)
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if labels.size else 0
        return cls(
            features=features,
            clean_labels=labels,
            observed_labels=labels.copy(),
            corrupted_mask=np.zeros(labels.shape[0], dtype=bool),
            num_classes=num_classes,
            label_names=label_names,
        )

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def validate_mask(self):
        """Assert the corruption flags agree with the label columns."""
        expect = self.observed_labels != self.clean_labels
        if not np.array_equal(expect, self.corrupted_mask):
            raise ConfigurationError("corrupted_mask disagrees with clean vs observed labels")


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian blobs: K balanced classes in r dimensions.

    Class centers sit on signed coordinate axes at distance separation/2
    from the origin (class k on axis k // 2 with alternating sign), so any
    K <= 2r has a distinct deterministic center. `spread` is the isotropic
    per-coordinate standard deviation.
    """

    num_classes: int
    samples_per_class: int
    feature_dim: int
    separation: float = 6.0
    spread: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.samples_per_class < 1:
            raise ConfigurationError("samples_per_class must be >= 1")
        if self.num_classes > 2 * self.feature_dim:
            raise ConfigurationError(
                f"need feature_dim >= num_classes / 2 for distinct centers, "
                f"got K={self.num_classes}, r={self.feature_dim}"
            )
        if self.separation <= 0 or self.spread <= 0:
            raise ConfigurationError("separation and spread must be positive")

    def centers(self) -> np.ndarray:
        c = np.zeros((self.num_classes, self.feature_dim))
        for k in range(self.num_classes):
            sign = 1.0 if k % 2 == 0 else -1.0
            c[k, k // 2] = sign * self.separation / 2.0
        return c


def generate_blobs(spec: SyntheticSpec) -> LabeledDataset:
    """Deterministic balanced Gaussian blobs for the given spec."""
    rng = np.random.default_rng(spec.seed)
    centers = spec.centers()
    labels = np.repeat(np.arange(spec.num_classes), spec.samples_per_class)
    noise = rng.standard_normal((labels.shape[0], spec.feature_dim)) * spec.spread
    features = centers[labels] + noise
    return LabeledDataset.from_clean(features, labels, num_classes=spec.num_classes)


@dataclass(frozen=True)
class FoldPlan:
    """A stratified partition of sample indices into folds."""

    num_folds: int
    assignments: np.ndarray
    seed: int

    def train_indices(self, fold: int) -> np.ndarray:
        return np.where(self.assignments != fold)[0]

    def predict_indices(self, fold: int) -> np.ndarray:
        return np.where(self.assignments == fold)[0]


def make_folds(data: LabeledDataset, num_folds: int, seed: int = 0) -> FoldPlan:
    """Stratify by observed label; fold sizes (overall and per class) differ by <= 1.

    Stratification uses observed labels only: fold construction must not
    peek at corruption ground truth.
    """
    if num_folds < 2:
        raise ConfigurationError(f"num_folds must be >= 2, got {num_folds}")
    n = len(data)
    if n < num_folds * data.num_classes:
        raise ConfigurationError(
            f"need at least num_folds * K = {num_folds * data.num_classes} samples, got {n}"
        )
    rng = np.random.default_rng(seed)
    assignments = np.full(n, -1, dtype=np.intp)
    offset = 0  # rotates which folds receive per-class remainders
    for c in range(data.num_classes):
        idx = np.where(data.observed_labels == c)[0]
        rng.shuffle(idx)
        n_c = idx.shape[0]
        base, rem = divmod(n_c, num_folds)
        sizes = np.full(num_folds, base, dtype=np.intp)
        for r in range(rem):
            sizes[(offset + r) % num_folds] += 1
        offset = (offset + rem) % num_folds
        pos = 0
        for f in range(num_folds):
            assignments[idx[pos : pos + sizes[f]]] = f
            pos += sizes[f]
    return FoldPlan(num_folds=num_folds, assignments=assignments, seed=seed)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def _feature_columns(r: int) -> list[str]:
    return [f"f{i}" for i in range(r)]


def load_csv(path, feature_dim: int | None = None, label_map: dict[str, int] | None = None) -> LabeledDataset:
    """Load a dataset CSV.

    feature_dim, when given, is validated against the file. label_map, when
    given, pins the label-name mapping (files being scored against an
    existing model must not introduce unknown labels); otherwise names map
    lexicographically to 0..K-1.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty file") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    if "label" not in header:
        raise ConfigurationError(f"{path}: missing required column 'label'")
    label_col = header.index("label")
    clean_col = header.index("clean_label") if "clean_label" in header else None
    feat_cols = [i for i, h in enumerate(header) if h.startswith("f") and h[1:].isdigit()]
    expected = _feature_columns(len(feat_cols))
    if [header[i] for i in feat_cols] != expected:
        raise ConfigurationError(
            f"{path}: feature columns must be contiguous f0..f{len(feat_cols) - 1}"
        )
    if feature_dim is not None and len(feat_cols) != feature_dim:
        raise ConfigurationError(
            f"{path}: expected {feature_dim} feature columns, found {len(feat_cols)}"
        )
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")

    n = len(rows)
    features = np.empty((n, len(feat_cols)))
    raw_labels: list[str] = []
    raw_clean: list[str] = []
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ConfigurationError(
                f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}"
            )
        for j, col in enumerate(feat_cols):
            try:
                features[i, j] = float(row[col])
            except ValueError:
                raise ConfigurationError(
                    f"{path}: row {i + 2}, column {header[col]}: non-numeric value {row[col]!r}"
                ) from None
        raw_labels.append(row[label_col].strip())
        if clean_col is not None:
            raw_clean.append(row[clean_col].strip())

    if label_map is None:
        names = sorted(set(raw_labels) | set(raw_clean))
        label_map = {name: i for i, name in enumerate(names)}
    else:
        unknown = (set(raw_labels) | set(raw_clean)) - set(label_map)
        if unknown:
            raise ConfigurationError(f"{path}: unknown labels {sorted(unknown)}")
        names = [name for name, _ in sorted(label_map.items(), key=lambda kv: kv[1])]

    observed = np.array([label_map[v] for v in raw_labels], dtype=np.intp)
    if clean_col is not None:
        clean = np.array([label_map[v] for v in raw_clean], dtype=np.intp)
    else:
        clean = observed.copy()
    return LabeledDataset(
        features=features,
        clean_labels=clean,
        observed_labels=observed,
        corrupted_mask=observed != clean,
        num_classes=len(label_map),
        label_names=tuple(names),
    )


def save_csv(data: LabeledDataset, path, include_clean: bool = True):
    """Write a dataset back to CSV (lossless for float64 features via repr)."""
    header = _feature_columns(data.feature_dim) + ["label"]
    if include_clean:
        header.append("clean_label")

    def name(idx: int) -> str:
        return data.label_names[idx] if data.label_names else str(idx)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(len(data)):
            row = [repr(float(v)) for v in data.features[i]]
            row.append(name(int(data.observed_labels[i])))
            if include_clean:
                row.append(name(int(data.clean_labels[i])))
            writer.writerow(row)
