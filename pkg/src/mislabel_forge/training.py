"""Mini-batch training with Adam, loss scheduling, and per-epoch instrumentation.

The instrumentation exists for the training-dynamics studies: at the end of
each epoch a full forward pass (evaluation mode, no parameter updates)
records every sample's probability on its observed label, the gradient of
the scheduled loss with respect to that probability, and the logit margin
(as-labelled logit minus highest other logit). An optional epoch callback
receives the same pass's logits, which is how the area-under-margin tracker
hooks in without storing full logit histories.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import LabeledDataset
from .errors import ConfigurationError, TrainingDivergedError
from .losses import LossSpec, loss_grad_logits, loss_batch, scheduled_loss
from .net import Network, softmax

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float
    loss: LossSpec
    batch_size: int = 128
    lr_decay: tuple[tuple[int, float], ...] = ()
    shuffle_seed: int = 0
    record_prob_per_epoch: bool = False
    record_grad_per_epoch: bool = False
    record_logit_margins: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        decay = tuple((int(e), float(f)) for e, f in self.lr_decay)
        epochs = [e for e, _ in decay]
        if any(b <= a for a, b in zip(epochs, epochs[1:])):
            raise ConfigurationError(f"lr_decay epochs must be strictly increasing, got {epochs}")
        if any(e < 1 or e > self.epochs for e in epochs):
            raise ConfigurationError(f"lr_decay epochs must lie in [1, {self.epochs}], got {epochs}")
        object.__setattr__(self, "lr_decay", decay)

    @property
    def instrumented(self) -> bool:
        return self.record_prob_per_epoch or self.record_grad_per_epoch or self.record_logit_margins


@dataclass
class EpochTrace:
    """Per-epoch, per-sample instrumentation (arrays are (epochs, N) or None)."""

    p_label: np.ndarray | None
    grad_p: np.ndarray | None
    margin: np.ndarray | None
    loss_kind: list[str] = field(default_factory=list)

    @property
    def num_epochs(self) -> int:
        return len(self.loss_kind)

    def write_csv(self, path, corrupted_mask: np.ndarray):
        """Dump one row per (epoch, sample): epoch, sample_index, p_label, grad_p, margin, is_corrupt."""
        arrays = [a for a in (self.p_label, self.grad_p, self.margin) if a is not None]
        if not arrays:
            raise ConfigurationError("trace has no recorded arrays to dump")
        n = arrays[0].shape[1]

        def col(a, e, i):
            return repr(float(a[e, i])) if a is not None else ""

        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "sample_index", "p_label", "grad_p", "margin", "is_corrupt"])
            for e in range(self.num_epochs):
                for i in range(n):
                    writer.writerow(
                        [
                            e + 1,
                            i,
                            col(self.p_label, e, i),
                            col(self.grad_p, e, i),
                            col(self.margin, e, i),
                            int(corrupted_mask[i]),
                        ]
                    )


class Adam:
    """Per-parameter adaptive moments with bias correction."""

    def __init__(self, params: list[np.ndarray], learning_rate: float):
        self.params = params
        self.learning_rate = learning_rate
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]):
        self.t += 1
        b1, b2 = ADAM_BETA1, ADAM_BETA2
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def logit_margins(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Margin per sample: logit of the as-labelled class minus the highest other logit."""
    n = logits.shape[0]
    rows = np.arange(n)
    own = logits[rows, labels]
    masked = logits.copy()
    masked[rows, labels] = -np.inf
    return own - masked.max(axis=1)


def train(
    net: Network,
    data: LabeledDataset,
    cfg: TrainConfig,
    on_epoch_end=None,
) -> tuple[Network, EpochTrace]:
    """Train in place on observed labels; returns (net, trace).

    Deterministic given the network's initial state and cfg.shuffle_seed.
    on_epoch_end(epoch, logits, probs) is invoked after each epoch's
    evaluation pass over the full dataset.
    """
    n = len(data)
    x = data.features
    labels = data.observed_labels
    if labels.size and labels.max() >= net.num_classes:
        raise ConfigurationError(
            f"labels reach {labels.max()} but the network has {net.num_classes} outputs"
        )
    spec = cfg.loss.resolved()
    rng = np.random.default_rng(cfg.shuffle_seed)
    opt = Adam(net.parameters(), cfg.learning_rate)
    decay = dict(cfg.lr_decay)

    p_hist = np.empty((cfg.epochs, n)) if cfg.record_prob_per_epoch else None
    g_hist = np.empty((cfg.epochs, n)) if cfg.record_grad_per_epoch else None
    m_hist = np.empty((cfg.epochs, n)) if cfg.record_logit_margins else None
    kinds: list[str] = []

    for epoch in range(1, cfg.epochs + 1):
        if epoch in decay:
            opt.learning_rate *= decay[epoch]
        kind = scheduled_loss(spec, epoch)
        kinds.append(kind)

        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, probs = net.forward_batch(x[idx])
            values, dlogits = loss_grad_logits(spec, probs, labels[idx], kind=kind)
            mean_loss = float(values.mean())
            if not np.isfinite(mean_loss):
                raise TrainingDivergedError(
                    f"non-finite loss {mean_loss} at epoch {epoch}", epoch=epoch, batch=start // cfg.batch_size
                )
            grads = net.backward(dlogits)
            flat: list[np.ndarray] = []
            for layer, (dw, db) in enumerate(grads):
                if spec.l1_weight:
                    dw = dw + spec.l1_weight * np.sign(net.weights[layer])
                flat.append(dw)
                flat.append(db)
            opt.step(flat)

        needs_eval = cfg.instrumented or on_epoch_end is not None
        if needs_eval:
            eval_logits = net.predict_logits(x)
            eval_probs = softmax(eval_logits)
            if cfg.record_prob_per_epoch or cfg.record_grad_per_epoch:
                values, grad_p, _ = loss_batch(spec, eval_probs, labels, kind=kind)
                if cfg.record_prob_per_epoch:
                    p_hist[epoch - 1] = eval_probs[np.arange(n), labels]
                if cfg.record_grad_per_epoch:
                    g_hist[epoch - 1] = grad_p
            if cfg.record_logit_margins:
                m_hist[epoch - 1] = logit_margins(eval_logits, labels)
            if on_epoch_end is not None:
                on_epoch_end(epoch, eval_logits, eval_probs)

    return net, EpochTrace(p_label=p_hist, grad_p=g_hist, margin=m_hist, loss_kind=kinds)


def predict_probs(net: Network, features: np.ndarray) -> np.ndarray:
    """Row-normalized class probabilities for a feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != net.input_dim:
        raise ConfigurationError(
            f"expected features of shape (n, {net.input_dim}), got {features.shape}"
        )
    return net.predict_probs(features)


def accuracy(net: Network, data: LabeledDataset, against: str = "clean") -> float:
    labels = data.clean_labels if against == "clean" else data.observed_labels
    probs = predict_probs(net, data.features)
    return float((probs.argmax(axis=1) == labels).mean())


def _box_stats(values: np.ndarray) -> dict:
    """Tukey box-plot summary; whiskers clip to data within 1.5 IQR of the box."""
    if values.size == 0:
        return {
            "count": 0,
            "whisker_lo": float("nan"),
            "q1": float("nan"),
            "median": float("nan"),
            "q3": float("nan"),
            "whisker_hi": float("nan"),
        }
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    lo_lim, hi_lim = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = values[(values >= lo_lim) & (values <= hi_lim)]
    # Degenerate all-outlier guard cannot happen: the box itself is inside.
    return {
        "count": int(values.size),
        "whisker_lo": float(inside.min()),
        "q1": float(q1),
        "median": float(med),
        "q3": float(q3),
        "whisker_hi": float(inside.max()),
    }


def gradient_cohort_summary(trace: EpochTrace, corrupted_mask: np.ndarray) -> list[dict]:
    """Per-epoch box statistics of recorded values for the corrupt and clean cohorts.

    Returns one record per (epoch, statistic, cohort); statistics covered are
    whichever of p_label / grad_p / margin the trace recorded. Cohorts with
    no members get NaN stats and count 0.
    """
    corrupted_mask = np.asarray(corrupted_mask, dtype=bool)
    recorded = {
        "p_label": trace.p_label,
        "grad_p": trace.grad_p,
        "margin": trace.margin,
    }
    recorded = {k: v for k, v in recorded.items() if v is not None}
    if not recorded:
        raise ConfigurationError("trace has no recorded arrays to summarize")
    n = next(iter(recorded.values())).shape[1]
    if corrupted_mask.shape != (n,):
        raise ConfigurationError(f"mask must have shape ({n},), got {corrupted_mask.shape}")
    out = []
    for stat, arr in recorded.items():
        for epoch in range(trace.num_epochs):
            for cohort, sel in (("clean", ~corrupted_mask), ("corrupt", corrupted_mask)):
                rec = {"epoch": epoch + 1, "statistic": stat, "cohort": cohort}
                rec.update(_box_stats(arr[epoch][sel]))
                out.append(rec)
    return out
