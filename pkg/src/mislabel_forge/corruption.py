"""Synthetic label-error injection with ground-truth bookkeeping.

Three flip processes:

* uniform:    exactly round(eta * N) samples are flipped, chosen uniformly
              without replacement; each flips to a uniformly random other
              class. Exact counts keep the realized rate deterministic.
* symmetric:  i.i.d. per-sample flips with identical pairwise rates
              eta / (K - 1) for every (from, to) pair.
* asymmetric: i.i.d. per-sample flips drawn from a K x K transition matrix
              of pairwise rates (zero diagonal).

A flipped label always differs from the original.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .data import LabeledDataset
from .errors import ConfigurationError

CORRUPTION_MODES = ("uniform", "symmetric", "asymmetric")


@dataclass(frozen=True)
class CorruptionSpec:
    mode: str = "uniform"
    eta: float = 0.0
    transition: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", str(self.mode).lower())
        if self.mode not in CORRUPTION_MODES:
            raise ConfigurationError(
                f"corruption mode must be one of {CORRUPTION_MODES}, got {self.mode!r}"
            )
        if self.mode in ("uniform", "symmetric"):
            if not (0.0 <= self.eta < 1.0):
                raise ConfigurationError(f"eta must be in [0, 1), got {self.eta}")
        else:
            if self.transition is None:
                raise ConfigurationError("asymmetric corruption requires a transition matrix")
            t = np.asarray(self.transition, dtype=np.float64)
            if t.ndim != 2 or t.shape[0] != t.shape[1]:
                raise ConfigurationError(f"transition must be square, got shape {t.shape}")
            if np.any(np.diag(t) != 0.0):
                raise ConfigurationError("transition matrix must have a zero diagonal")
            if np.any(t < 0.0):
                raise ConfigurationError("transition rates must be non-negative")
            row_sums = t.sum(axis=1)
            if np.any(row_sums >= 1.0):
                raise ConfigurationError(
                    f"each transition row must sum to < 1, got sums {row_sums}"
                )
            object.__setattr__(self, "transition", t)

    def with_eta(self, eta: float) -> "CorruptionSpec":
        return dc_replace(self, eta=eta)


def _flip_exact_count(labels: np.ndarray, eta: float, num_classes: int, rng: np.random.Generator):
    n = labels.shape[0]
    n_flip = math.floor(eta * n + 0.5)
    observed = labels.copy()
    if n_flip == 0:
        return observed
    chosen = rng.choice(n, size=n_flip, replace=False)
    # Draw an offset in 1..K-1 and wrap: uniform over the other classes.
    offsets = rng.integers(1, num_classes, size=n_flip)
    observed[chosen] = (labels[chosen] + offsets) % num_classes
    return observed


def _flip_transition(labels: np.ndarray, transition: np.ndarray, rng: np.random.Generator):
    n = labels.shape[0]
    k = transition.shape[0]
    observed = labels.copy()
    u = rng.random(n)
    # Per-sample inverse-CDF over [targets..., stay].
    cum = np.cumsum(transition, axis=1)
    for i in range(n):
        row = cum[labels[i]]
        j = int(np.searchsorted(row, u[i], side="right"))
        if j < k:
            observed[i] = j
    return observed


def corrupt(data: LabeledDataset, spec: CorruptionSpec) -> LabeledDataset:
    """Flip labels of a clean dataset per the spec; records mask and clean labels."""
    if np.any(data.observed_labels != data.clean_labels):
        raise ConfigurationError("corrupt() expects a clean dataset (observed == clean labels)")
    k = data.num_classes
    if spec.mode == "asymmetric" and spec.transition.shape[0] != k:
        raise ConfigurationError(
            f"transition matrix is {spec.transition.shape[0]}x{spec.transition.shape[0]} "
            f"but the dataset has {k} classes"
        )
    rng = np.random.default_rng(spec.seed)
    y = data.clean_labels
    if spec.mode == "uniform":
        observed = _flip_exact_count(y, spec.eta, k, rng)
    elif spec.mode == "symmetric":
        t = np.full((k, k), spec.eta / (k - 1))
        np.fill_diagonal(t, 0.0)
        observed = _flip_transition(y, t, rng)
    else:
        observed = _flip_transition(y, spec.transition, rng)
    return LabeledDataset(
        features=data.features,
        clean_labels=y.copy(),
        observed_labels=observed,
        corrupted_mask=observed != y,
        num_classes=k,
        label_names=data.label_names,
    )


def realized_rates(data: LabeledDataset):
    """Measured corruption: (overall rate, per-class rates, K x K flip-count matrix).

    The matrix counts flips only (diagonal stays zero); per-class rates are
    fractions of each clean class that was flipped.
    """
    k = data.num_classes
    mask = data.corrupted_mask
    overall = float(mask.mean()) if mask.size else 0.0
    per_class = np.zeros(k)
    flips = np.zeros((k, k), dtype=np.int64)
    for c in range(k):
        in_class = data.clean_labels == c
        total = int(in_class.sum())
        flipped = in_class & mask
        per_class[c] = flipped.sum() / total if total else 0.0
        targets, counts = np.unique(data.observed_labels[flipped], return_counts=True)
        flips[c, targets] = counts
    return overall, per_class, flips
