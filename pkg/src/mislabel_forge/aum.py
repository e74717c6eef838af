"""Area-under-margin mislabel detector.

Each sample's margin (as-labelled logit minus highest other logit) is
accumulated over training epochs; the average is its AUM. A small set of
threshold samples is deliberately relabelled to an extra fake class (index
K for a K-class problem, with a matching extra output neuron) so they
behave like guaranteed label errors; the 99th percentile of their AUMs
(nearest-rank) is the flagging threshold. Non-threshold samples with
AUM <= threshold are flagged; threshold samples are excluded from the
detection report entirely.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset
from .errors import ConfigurationError
from .training import logit_margins


@dataclass
class AumTracker:
    margin_sums: np.ndarray
    epochs_observed: int
    threshold_indices: np.ndarray
    fake_class_index: int

    @classmethod
    def create(cls, num_samples: int, threshold_indices, fake_class_index: int) -> "AumTracker":
        return cls(
            margin_sums=np.zeros(num_samples),
            epochs_observed=0,
            threshold_indices=np.asarray(threshold_indices, dtype=np.intp),
            fake_class_index=fake_class_index,
        )

    def aum_values(self) -> np.ndarray:
        if self.epochs_observed < 1:
            raise ConfigurationError("no margins recorded yet")
        return self.margin_sums / self.epochs_observed


def assign_threshold_samples(
    data: LabeledDataset, fraction: float, seed: int
) -> tuple[LabeledDataset, np.ndarray]:
    """Relabel a uniform round(fraction * N) subset to the fake class K.

    Returns the training view (num_classes = K + 1; corruption mask carried
    over unchanged) and the chosen indices.
    """
    if not (0.0 < fraction < 0.5):
        raise ConfigurationError(f"threshold fraction must be in (0, 0.5), got {fraction}")
    n = len(data)
    count = math.floor(fraction * n + 0.5)
    if count < 1:
        raise ConfigurationError(f"fraction {fraction} selects no threshold samples for N={n}")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=count, replace=False))
    observed = data.observed_labels.copy()
    observed[chosen] = data.num_classes
    relabelled = LabeledDataset(
        features=data.features,
        clean_labels=data.clean_labels.copy(),
        observed_labels=observed,
        corrupted_mask=data.corrupted_mask.copy(),
        num_classes=data.num_classes + 1,
        label_names=None,
    )
    return relabelled, chosen


def record_margins(tracker: AumTracker, logits: np.ndarray, observed_labels: np.ndarray) -> AumTracker:
    """Add one epoch's margins (one logits row per sample) to the running sums."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(observed_labels, dtype=np.intp)
    if logits.ndim != 2 or logits.shape[0] != tracker.margin_sums.shape[0]:
        raise ConfigurationError(
            f"expected logits of shape ({tracker.margin_sums.shape[0]}, K), got {logits.shape}"
        )
    if labels.max() >= logits.shape[1]:
        raise ConfigurationError(
            f"label {labels.max()} out of range for {logits.shape[1]} logit columns"
        )
    tracker.margin_sums += logit_margins(logits, labels)
    tracker.epochs_observed += 1
    return tracker


def nearest_rank_percentile(values: np.ndarray, pct: float) -> float:
    """ceil(pct/100 * n)-th order statistic (1-indexed, ascending)."""
    values = np.sort(np.asarray(values, dtype=np.float64))
    n = values.shape[0]
    if n == 0:
        raise ConfigurationError("percentile of an empty sample")
    rank = max(1, math.ceil(pct / 100.0 * n))
    return float(values[rank - 1])


def detect_aum(tracker: AumTracker) -> tuple[np.ndarray, float]:
    """Flag non-threshold samples with AUM <= the threshold samples' 99th percentile."""
    if tracker.threshold_indices.size == 0:
        raise ConfigurationError("tracker has no threshold samples")
    aums = tracker.aum_values()
    tau = nearest_rank_percentile(aums[tracker.threshold_indices], 99.0)
    is_threshold = np.zeros(aums.shape[0], dtype=bool)
    is_threshold[tracker.threshold_indices] = True
    flagged = np.where(~is_threshold & (aums <= tau))[0]
    return flagged, tau


def write_aum_csv(path, tracker: AumTracker, flagged: np.ndarray, corrupted_mask: np.ndarray):
    aums = tracker.aum_values()
    n = aums.shape[0]
    is_threshold = np.zeros(n, dtype=bool)
    is_threshold[tracker.threshold_indices] = True
    is_flagged = np.zeros(n, dtype=bool)
    is_flagged[flagged] = True
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "aum", "is_threshold_sample", "flagged", "is_corrupt"])
        for i in range(n):
            writer.writerow(
                [i, repr(float(aums[i])), int(is_threshold[i]), int(is_flagged[i]), int(corrupted_mask[i])]
            )
