"""Detection-quality scores and distribution-separation statistics.

Positives are corrupted samples. Zero-denominator conventions: precision is
0 with no flags, recall is 0 with no corrupted samples, F1 is 0 when either
component is 0. These keep sweeps over eta = 0 NaN-free.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigurationError


@dataclass
class DetectionReport:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    balanced_accuracy: float
    cohens_d: float | None = None
    wasserstein: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _as_flag_array(flags, n: int) -> np.ndarray:
    flags = np.asarray(flags)
    if flags.dtype == bool:
        if flags.shape != (n,):
            raise ConfigurationError(f"boolean flags must have shape ({n},)")
        return flags
    out = np.zeros(n, dtype=bool)
    if flags.size:
        if flags.min() < 0 or flags.max() >= n:
            raise ConfigurationError(f"flag indices out of range [0, {n})")
        out[flags.astype(np.intp)] = True
    return out


def score_detection(flags, corrupted_mask, include=None) -> DetectionReport:
    """Confusion counts and derived metrics for a set of flagged indices.

    flags: index array or boolean mask; corrupted_mask: ground truth;
    include: optional boolean mask restricting which samples are evaluated
    (used to drop AUM threshold samples from the denominators).
    """
    mask = np.asarray(corrupted_mask, dtype=bool)
    n = mask.shape[0]
    flagged = _as_flag_array(flags, n)
    keep = np.ones(n, dtype=bool) if include is None else np.asarray(include, dtype=bool)
    flagged = flagged[keep]
    mask = mask[keep]

    tp = int(np.sum(flagged & mask))
    fp = int(np.sum(flagged & ~mask))
    fn = int(np.sum(~flagged & mask))
    tn = int(np.sum(~flagged & ~mask))

    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2 * precision * recall / (precision + recall) if (precision and recall) else 0.0
    tnr = tn / (tn + fp) if (tn + fp) else 0.0
    balanced_accuracy = 0.5 * (recall + tnr)
    return DetectionReport(
        tp=tp, fp=fp, tn=tn, fn=fn,
        precision=precision, recall=recall, f1=f1, balanced_accuracy=balanced_accuracy,
    )


def cohens_d(a, b) -> float:
    """Standardized mean difference with Bessel-corrected pooled variance.

    Returns NaN when the pooled variance is zero (undefined effect size).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ConfigurationError("cohens_d needs at least 2 samples per group")
    na, nb = a.size, b.size
    pooled_var = ((na - 1) * a.var(ddof=1) + (nb - 1) * b.var(ddof=1)) / (na + nb - 2)
    if pooled_var == 0.0:
        return float("nan")
    return float(abs(a.mean() - b.mean()) / np.sqrt(pooled_var))


def wasserstein_1d(a, b) -> float:
    """First-order empirical transport distance between two 1-D samples.

    Equal sizes reduce to the mean absolute difference of matched order
    statistics; otherwise the CDF-difference integral over the pooled
    support is used.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ConfigurationError("wasserstein_1d needs non-empty samples")
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    support = np.sort(np.concatenate([a, b]))
    deltas = np.diff(support)
    cdf_a = np.searchsorted(a, support[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, support[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def separation_stats(values, corrupted_mask, include=None) -> tuple[float, float]:
    """(Cohen's d, Wasserstein) between corrupt and clean cohorts of a statistic."""
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(corrupted_mask, dtype=bool)
    if include is not None:
        keep = np.asarray(include, dtype=bool)
        values = values[keep]
        mask = mask[keep]
    corrupt = values[mask]
    clean = values[~mask]
    if corrupt.size < 2 or clean.size < 2:
        return float("nan"), float("nan")
    return cohens_d(corrupt, clean), wasserstein_1d(corrupt, clean)
