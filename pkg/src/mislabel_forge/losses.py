"""Robust classification losses with closed-form values and analytic gradients.

Implemented per-sample on a probability vector p and an as-labelled class y
(writing p_y for p[y]):

    cross-entropy     CE  = -log(p_y)
    focal             FL  = -(1 - p_y)^gamma * log(p_y)
    generalized CE    GCE = (1 - p_y^q) / q,           0 < q <= 1
    blurry            BL  = -(p_y)^gamma * log(p_y)
    piecewise-zero    PZ  = 0 if p_y <= c else CE
    active-negative   ANL = alpha * L_norm + beta * L_nn

Blurry loss is non-monotonic: its gradient in p_y is positive below the
stationary point p_y = exp(-1/gamma), so low-confidence samples are pushed
away from their as-labelled class instead of toward it. Piecewise-zero loss
has zero value and zero gradient inside the cutoff region, so such samples
never update the weights.

ANL combines a normalized loss, L_norm = L(y) / sum_k L(k), with a
normalized negative loss built by flipping the active loss vertically about
its maximum A and normalizing: L_nn = 1 - (A - L(y)) / sum_k (A - L(k)).
The active loss is CE or focal depending on the variant.

Each evaluation reports the loss value, the partial derivative with respect
to p_y (other coordinates held fixed), and the gradient with respect to the
logits obtained by chaining the full dL/dp vector through the softmax
Jacobian. Probabilities are clamped to [PROB_FLOOR, 1 - PROB_FLOOR] before
any log.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError

PROB_FLOOR = 1e-12

LOSS_KINDS = ("ce", "fl", "gce", "anl_ce", "anl_fl", "bl", "pz")

# Standard focal exponent; blurry default is mid-grid and normally swept.
DEFAULT_FOCAL_GAMMA = 2.0
DEFAULT_BLURRY_GAMMA = 0.5
DEFAULT_GCE_Q = 0.7
DEFAULT_ANL_ALPHA = 1.0
DEFAULT_ANL_BETA = 1.0
DEFAULT_ANL_L1 = 1e-5


@dataclass(frozen=True)
class LossSpec:
    """A loss selector plus its parameters and schedule delay.

    `delay` only takes effect through `scheduled_loss`: the first `delay`
    epochs train with cross-entropy, later epochs with the configured kind.
    """

    kind: str = "ce"
    gamma: float | None = None
    cutoff: float | None = None
    q: float | None = None
    alpha: float | None = None
    beta: float | None = None
    l1_weight: float | None = None
    delay: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).lower())
        if self.kind not in LOSS_KINDS:
            raise ConfigurationError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        if self.delay < 0:
            raise ConfigurationError(f"delay must be >= 0, got {self.delay}")
        if self.gamma is not None and self.gamma < 0:
            raise ConfigurationError(f"gamma must be >= 0, got {self.gamma}")
        if self.cutoff is not None and not (0.0 <= self.cutoff <= 1.0):
            raise ConfigurationError(f"cutoff must be in [0, 1], got {self.cutoff}")
        if self.q is not None and not (0.0 < self.q <= 1.0):
            raise ConfigurationError(f"q must be in (0, 1], got {self.q}")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigurationError(f"alpha must be > 0, got {self.alpha}")
        if self.beta is not None and self.beta <= 0:
            raise ConfigurationError(f"beta must be > 0, got {self.beta}")
        if self.l1_weight is not None and self.l1_weight < 0:
            raise ConfigurationError(f"l1_weight must be >= 0, got {self.l1_weight}")

    def resolved(self) -> "LossSpec":
        """Fill in the conventional defaults for whatever the kind needs."""
        kw = {}
        if self.kind in ("fl", "anl_fl") and self.gamma is None:
            kw["gamma"] = DEFAULT_FOCAL_GAMMA
        if self.kind == "bl" and self.gamma is None:
            kw["gamma"] = DEFAULT_BLURRY_GAMMA
        if self.kind == "pz" and self.cutoff is None:
            kw["cutoff"] = 0.0
        if self.kind == "gce" and self.q is None:
            kw["q"] = DEFAULT_GCE_Q
        if self.kind in ("anl_ce", "anl_fl"):
            if self.alpha is None:
                kw["alpha"] = DEFAULT_ANL_ALPHA
            if self.beta is None:
                kw["beta"] = DEFAULT_ANL_BETA
            if self.l1_weight is None:
                kw["l1_weight"] = DEFAULT_ANL_L1
        if self.l1_weight is None and "l1_weight" not in kw:
            kw["l1_weight"] = 0.0
        return replace(self, **kw) if kw else self

    def effective_kind(self, epoch: int) -> str:
        return scheduled_loss(self, epoch)


@dataclass(frozen=True)
class LossEval:
    """Per-sample loss value and gradients.

    grad_p is d(loss)/d(p_y) with the other probability coordinates held
    fixed; grad_logits is the full chain through the softmax Jacobian.
    """

    value: float
    grad_p: float
    grad_logits: np.ndarray


def clamp_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)


def _check_labels(labels: np.ndarray, num_classes: int):
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ConfigurationError(
            f"label out of range [0, {num_classes}): min={labels.min()}, max={labels.max()}"
        )


# ---------------------------------------------------------------------------
# Vectorized cores. Each takes p_y (n,) clamped and returns (value, dvalue/dp_y).
# ---------------------------------------------------------------------------


def _ce_core(py):
    return -np.log(py), -1.0 / py


def _focal_core(py, gamma):
    if gamma == 0.0:
        return _ce_core(py)
    w = (1.0 - py) ** gamma
    logp = np.log(py)
    return -w * logp, gamma * (1.0 - py) ** (gamma - 1.0) * logp - w / py


def _gce_core(py, q):
    return (1.0 - py**q) / q, -(py ** (q - 1.0))


def _blurry_core(py, gamma):
    if gamma == 0.0:
        return _ce_core(py)
    logp = np.log(py)
    return -(py**gamma) * logp, -(py ** (gamma - 1.0)) * (gamma * logp + 1.0)


def _piecewise_zero_core(py, cutoff):
    value, grad = _ce_core(py)
    inside = py <= cutoff
    return np.where(inside, 0.0, value), np.where(inside, 0.0, grad)


def _active_losses(p, gamma=None):
    """Active loss and its derivative applied elementwise to a full (n, K) matrix."""
    if gamma is None:
        return _ce_core(p)
    return _focal_core(p, gamma)


def _anl_batch(p, labels, alpha, beta, focal_gamma=None):
    """Active-negative loss on clamped probs p (n, K).

    Returns (value (n,), dvalue/dp (n, K)). The normalized-negative part
    flips the active loss about its maximum A (attained at the probability
    floor) before normalizing over classes.
    """
    n, k = p.shape
    loss_k, dloss_k = _active_losses(p, focal_gamma)
    rows = np.arange(n)
    loss_y = loss_k[rows, labels]
    dloss_y = dloss_k[rows, labels]

    s = loss_k.sum(axis=1)
    # L_norm = L(y) / S; dL_norm/dp_k = L'(k) * (delta_ky * S - L(y)) / S^2
    l_norm = loss_y / s
    dnorm = dloss_k * (-loss_y / (s * s))[:, None]
    dnorm[rows, labels] = dloss_y * (s - loss_y) / (s * s)

    floor = np.float64(PROB_FLOOR)
    a_max = float(_active_losses(np.array([floor]), focal_gamma)[0][0])
    t = k * a_max - s
    flip_y = a_max - loss_y
    # L_nn = 1 - (A - L(y)) / T; dL_nn/dp_k = L'(k) * (delta_ky * T - (A - L(y))) / T^2
    l_nn = 1.0 - flip_y / t
    dnn = dloss_k * (-flip_y / (t * t))[:, None]
    dnn[rows, labels] = dloss_y * (t - flip_y) / (t * t)

    value = alpha * l_norm + beta * l_nn
    return value, alpha * dnorm + beta * dnn


def loss_batch(spec: LossSpec, probs: np.ndarray, labels: np.ndarray, kind: str | None = None):
    """Vectorized loss over a batch.

    probs: (n, K) raw probabilities (clamped internally); labels: (n,) ints.
    kind overrides spec.kind (used by the training schedule).
    Returns (value (n,), grad_p (n,), grad_dp (n, K)) where grad_dp is the
    full dL/dp vector per sample.
    """
    spec = spec.resolved()
    kind = (kind or spec.kind).lower()
    p = clamp_probs(np.asarray(probs, dtype=np.float64))
    if p.ndim != 2:
        raise ConfigurationError(f"expected probs of shape (n, K), got {p.shape}")
    labels = np.asarray(labels, dtype=np.intp)
    _check_labels(labels, p.shape[1])
    n = p.shape[0]
    rows = np.arange(n)
    py = p[rows, labels]

    if kind in ("anl_ce", "anl_fl"):
        gamma = spec.gamma if kind == "anl_fl" else None
        value, grad_dp = _anl_batch(p, labels, spec.alpha, spec.beta, gamma)
        grad_p = grad_dp[rows, labels]
        return value, grad_p, grad_dp

    if kind == "ce":
        value, grad_p = _ce_core(py)
    elif kind == "fl":
        value, grad_p = _focal_core(py, spec.gamma)
    elif kind == "gce":
        value, grad_p = _gce_core(py, spec.q)
    elif kind == "bl":
        value, grad_p = _blurry_core(py, spec.gamma)
    elif kind == "pz":
        value, grad_p = _piecewise_zero_core(py, spec.cutoff)
    else:
        raise ConfigurationError(f"unknown loss kind {kind!r}")

    grad_dp = np.zeros_like(p)
    grad_dp[rows, labels] = grad_p
    return value, grad_p, grad_dp


def grad_wrt_logits(probs: np.ndarray, grad_dp: np.ndarray) -> np.ndarray:
    """Chain dL/dp through the softmax Jacobian: dL/dz_j = p_j (g_j - <g, p>)."""
    p = clamp_probs(np.asarray(probs, dtype=np.float64))
    inner = (grad_dp * p).sum(axis=-1, keepdims=True)
    return p * (grad_dp - inner)


def loss_grad_logits(spec: LossSpec, probs: np.ndarray, labels: np.ndarray, kind: str | None = None):
    """Batch (value, grad_logits) used by the training loop."""
    value, _, grad_dp = loss_batch(spec, probs, labels, kind=kind)
    return value, grad_wrt_logits(probs, grad_dp)


def _single(spec: LossSpec, p, label) -> LossEval:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise ConfigurationError(f"expected a probability vector, got shape {p.shape}")
    labels = np.asarray([label])
    value, grad_p, grad_dp = loss_batch(spec, p[None, :], labels)
    grad_logits = grad_wrt_logits(p[None, :], grad_dp)[0]
    return LossEval(float(value[0]), float(grad_p[0]), grad_logits)


# ---------------------------------------------------------------------------
# Per-sample API
# ---------------------------------------------------------------------------


def ce(p, label) -> LossEval:
    return _single(LossSpec(kind="ce"), p, label)


def focal(p, label, gamma: float) -> LossEval:
    return _single(LossSpec(kind="fl", gamma=gamma), p, label)


def gce(p, label, q: float) -> LossEval:
    return _single(LossSpec(kind="gce", q=q), p, label)


def blurry(p, label, gamma: float) -> LossEval:
    return _single(LossSpec(kind="bl", gamma=gamma), p, label)


def piecewise_zero(p, label, cutoff: float) -> LossEval:
    return _single(LossSpec(kind="pz", cutoff=cutoff), p, label)


def anl(p, label, alpha: float, beta: float, variant: str = "ce", gamma: float | None = None) -> LossEval:
    """Active-negative loss; variant is "ce" or "fl" for the active component."""
    variant = variant.lower()
    if variant not in ("ce", "fl"):
        raise ConfigurationError(f"anl variant must be 'ce' or 'fl', got {variant!r}")
    kind = "anl_ce" if variant == "ce" else "anl_fl"
    return _single(LossSpec(kind=kind, alpha=alpha, beta=beta, gamma=gamma), p, label)


def evaluate(spec: LossSpec, p, label, epoch: int | None = None) -> LossEval:
    """Evaluate the spec's loss (after scheduling, when an epoch is given)."""
    kind = spec.kind if epoch is None else scheduled_loss(spec, epoch)
    p = np.asarray(p, dtype=np.float64)
    labels = np.asarray([label])
    value, grad_p, grad_dp = loss_batch(spec, p[None, :], labels, kind=kind)
    grad_logits = grad_wrt_logits(p[None, :], grad_dp)[0]
    return LossEval(float(value[0]), float(grad_p[0]), grad_logits)


def scheduled_loss(spec: LossSpec, epoch: int) -> str:
    """Effective loss kind at a 1-indexed epoch: CE through the delay, then spec.kind."""
    if epoch < 1:
        raise ConfigurationError(f"epoch must be >= 1, got {epoch}")
    return "ce" if epoch <= spec.delay else spec.kind


def blurry_stationary_point(gamma: float) -> float:
    """p_y where the blurry-loss gradient changes sign (exp(-1/gamma); 0 for gamma=0)."""
    if gamma < 0:
        raise ConfigurationError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0.0:
        return 0.0
    return float(np.exp(-1.0 / gamma))
