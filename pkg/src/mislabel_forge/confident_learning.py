"""Confident-learning mislabel detector.

Out-of-fold probabilities feed a confident joint: a K x K count matrix whose
(i, j) cell holds the number of samples labelled i whose predicted
probability for class j clears that class's confidence threshold (threshold
= mean self-confidence of samples labelled j, membership = argmax among
threshold-clearing classes, ties to the lowest class index).

Pruning proposals:

* by-class:      for each class i, the sum of row i's off-diagonal counts
                 picks how many of its lowest-self-confidence samples to flag.
* by-noise-rate: each off-diagonal cell (i, j) flags its count of samples
                 labelled i with the largest margin p_j - p_i.
* both:          intersection of the two proposals.

Ranking ties break toward the lower sample index.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .data import FoldPlan, LabeledDataset
from .errors import ConfigurationError
from .net import NetConfig, init_network
from .training import TrainConfig, train, predict_probs
from .seeding import derive_seed

log = logging.getLogger(__name__)

PRUNE_METHODS = ("pbc", "pbnr", "both")


@dataclass
class ProbMatrix:
    """Out-of-sample predicted probabilities; fold_index marks each row's held-out fold."""

    probs: np.ndarray
    fold_index: np.ndarray

    def __post_init__(self):
        sums = self.probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ConfigurationError("probability rows must sum to 1 within 1e-9")

    @property
    def num_classes(self) -> int:
        return self.probs.shape[1]

    def self_confidence(self, labels: np.ndarray) -> np.ndarray:
        return self.probs[np.arange(self.probs.shape[0]), labels]


@dataclass
class ConfidentJoint:
    thresholds: np.ndarray
    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    def off_diagonal_total(self) -> int:
        return int(self.counts.sum() - np.trace(self.counts))

    def joint_distribution(self) -> np.ndarray:
        """Normalized form of the counts (reporting only; detection uses raw counts)."""
        total = self.counts.sum()
        return self.counts / total if total else self.counts.astype(np.float64)


def out_of_fold_probs(
    data: LabeledDataset,
    fold_plan: FoldPlan,
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
) -> ProbMatrix:
    """Train one model per fold on the other folds; assemble held-out predictions.

    Per-fold init and shuffle seeds derive deterministically from the
    configured seeds and the fold number.
    """
    n = len(data)
    probs = np.zeros((n, net_cfg.num_classes))
    for fold in range(fold_plan.num_folds):
        train_idx = fold_plan.train_indices(fold)
        predict_idx = fold_plan.predict_indices(fold)
        present = np.unique(data.observed_labels[train_idx])
        if present.size < data.num_classes:
            missing = sorted(set(range(data.num_classes)) - set(present.tolist()))
            log.warning("fold %d: classes %s absent from its training split", fold, missing)
        sub = LabeledDataset(
            features=data.features[train_idx],
            clean_labels=data.clean_labels[train_idx],
            observed_labels=data.observed_labels[train_idx],
            corrupted_mask=data.corrupted_mask[train_idx],
            num_classes=data.num_classes,
            label_names=data.label_names,
        )
        fold_net_cfg = NetConfig(
            input_dim=net_cfg.input_dim,
            hidden_dims=net_cfg.hidden_dims,
            num_classes=net_cfg.num_classes,
            activation=net_cfg.activation,
            init_seed=derive_seed(net_cfg.init_seed, "fold-init", fold),
        )
        fold_train_cfg = TrainConfig(
            epochs=train_cfg.epochs,
            learning_rate=train_cfg.learning_rate,
            loss=train_cfg.loss,
            batch_size=train_cfg.batch_size,
            lr_decay=train_cfg.lr_decay,
            shuffle_seed=derive_seed(train_cfg.shuffle_seed, "fold-shuffle", fold),
        )
        net = init_network(fold_net_cfg)
        train(net, sub, fold_train_cfg)
        probs[predict_idx] = predict_probs(net, data.features[predict_idx])
    return ProbMatrix(probs=probs, fold_index=fold_plan.assignments.copy())


def estimate_confident_joint(probs: ProbMatrix, observed_labels: np.ndarray) -> ConfidentJoint:
    """Count confident class memberships against per-class mean-confidence thresholds."""
    p = probs.probs
    n, k = p.shape
    labels = np.asarray(observed_labels, dtype=np.intp)
    if labels.shape != (n,):
        raise ConfigurationError(f"labels must have shape ({n},), got {labels.shape}")
    if labels.min() < 0 or labels.max() >= k:
        raise ConfigurationError(f"labels out of range [0, {k})")

    thresholds = np.full(k, np.nan)
    for j in range(k):
        rows = labels == j
        if rows.any():
            thresholds[j] = p[rows, j].mean()
        else:
            log.warning("class %d has no samples; its threshold is undefined", j)

    counts = np.zeros((k, k), dtype=np.int64)
    defined = ~np.isnan(thresholds)
    # Rows confident in no class are left uncounted.
    above = p >= thresholds[None, :]
    above[:, ~defined] = False
    candidate = np.where(above, p, -np.inf)
    best = candidate.argmax(axis=1)  # argmax ties resolve to the lowest index
    confident = above.any(axis=1)
    for i in np.where(confident)[0]:
        counts[labels[i], best[i]] += 1
    return ConfidentJoint(thresholds=thresholds, counts=counts)


def _rank_take(candidates: np.ndarray, keys: np.ndarray, count: int) -> np.ndarray:
    """Take `count` candidates with the smallest key; ties to the lower index."""
    order = np.lexsort((candidates, keys))
    return candidates[order[:count]]


def prune(
    joint: ConfidentJoint,
    probs: ProbMatrix,
    observed_labels: np.ndarray,
    method: str = "both",
) -> np.ndarray:
    """Detected sample indices (sorted) under the chosen pruning method."""
    method = method.lower()
    if method not in PRUNE_METHODS:
        raise ConfigurationError(f"method must be one of {PRUNE_METHODS}, got {method!r}")
    if method == "pbc":
        flagged = _prune_by_class(joint, probs, observed_labels)
    elif method == "pbnr":
        flagged = _prune_by_noise_rate(joint, probs, observed_labels)
    else:
        flagged = np.intersect1d(
            _prune_by_class(joint, probs, observed_labels),
            _prune_by_noise_rate(joint, probs, observed_labels),
        )
    return np.sort(flagged)


def _prune_by_class(joint: ConfidentJoint, probs: ProbMatrix, labels: np.ndarray) -> np.ndarray:
    p = probs.probs
    flagged: list[np.ndarray] = []
    for i in range(joint.num_classes):
        n_i = int(joint.counts[i].sum() - joint.counts[i, i])
        if n_i == 0:
            continue
        candidates = np.where(labels == i)[0]
        flagged.append(_rank_take(candidates, p[candidates, i], n_i))
    return np.concatenate(flagged) if flagged else np.empty(0, dtype=np.intp)


def _prune_by_noise_rate(joint: ConfidentJoint, probs: ProbMatrix, labels: np.ndarray) -> np.ndarray:
    p = probs.probs
    flagged: set[int] = set()
    for i in range(joint.num_classes):
        candidates = np.where(labels == i)[0]
        if candidates.size == 0:
            continue
        for j in range(joint.num_classes):
            if i == j or joint.counts[i, j] == 0:
                continue
            margin = p[candidates, j] - p[candidates, i]
            take = _rank_take(candidates, -margin, int(joint.counts[i, j]))
            flagged.update(take.tolist())
    return np.fromiter(sorted(flagged), dtype=np.intp, count=len(flagged))


def write_detection_csv(
    path,
    probs: ProbMatrix,
    observed_labels: np.ndarray,
    pbc: np.ndarray,
    pbnr: np.ndarray,
    both: np.ndarray,
):
    """Per-sample detection dump with all three proposal sets."""
    self_conf = probs.self_confidence(observed_labels)
    in_pbc = np.zeros(len(observed_labels), dtype=bool)
    in_pbc[pbc] = True
    in_pbnr = np.zeros_like(in_pbc)
    in_pbnr[pbnr] = True
    in_both = np.zeros_like(in_pbc)
    in_both[both] = True
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_index", "observed_label", "self_confidence", "flagged_pbc", "flagged_pbnr", "flagged_both"]
        )
        for i in range(len(observed_labels)):
            writer.writerow(
                [i, int(observed_labels[i]), repr(float(self_conf[i])), int(in_pbc[i]), int(in_pbnr[i]), int(in_both[i])]
            )
