"""Minimal dense feedforward classifier with exact analytic backpropagation.

All math is float64. The network exposes logits and softmax probabilities;
any loss that provides a gradient with respect to the logits can drive
`backward`, which returns parameter gradients averaged over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class NetConfig:
    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ConfigurationError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError(f"hidden dims must all be >= 1, got {self.hidden_dims}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}"
            )

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilised by max subtraction."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Network:
    """Dense MLP; hidden activations are relu or tanh, output is softmax.

    Weight matrices are (fan_in, fan_out) so a batch X of shape (n, d)
    propagates as X @ W + b. The forward pass caches inputs and hidden
    activations so `backward` can run the exact chain rule.
    """

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray], activation: str):
        self.weights = weights
        self.biases = biases
        self.activation = activation
        self._cache = None

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def parameters(self) -> list[np.ndarray]:
        """Flat list of parameter arrays, weights and biases interleaved per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "Network":
        return Network(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    def _act(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def _act_grad(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return (z > 0.0).astype(np.float64)
        return 1.0 - a * a

    def forward_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Run a batch (n, input_dim) through the net; returns (logits, probs).

        Caches intermediates for `backward`.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ConfigurationError(
                f"expected input of shape (n, {self.input_dim}), got {x.shape}"
            )
        acts = [x]
        pre = []
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ w + b
            h = self._act(z)
            pre.append(z)
            acts.append(h)
        logits = h @ self.weights[-1] + self.biases[-1]
        self._cache = (acts, pre)
        probs = softmax(logits)
        return logits, probs

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Single-sample forward; returns (logits, probs) as 1-D arrays."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ConfigurationError(f"expected a 1-D feature vector, got shape {x.shape}")
        logits, probs = self.forward_batch(x[None, :])
        return logits[0], probs[0]

    def predict_logits(self, x: np.ndarray) -> np.ndarray:
        """Inference-only logits for a batch; does not disturb the cache."""
        x = np.asarray(x, dtype=np.float64)
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = self._act(h @ w + b)
        return h @ self.weights[-1] + self.biases[-1]

    def predict_probs(self, x: np.ndarray) -> np.ndarray:
        """Inference-only probabilities for a batch; does not disturb the cache."""
        return softmax(self.predict_logits(x))

    def backward(self, dloss_dlogits: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Backpropagate per-sample logit gradients; returns [(dW, db)] per layer.

        Gradients are the mean over the batch, matching a mean-reduced loss.
        Requires a preceding `forward_batch` on the same inputs.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        acts, pre = self._cache
        g = np.asarray(dloss_dlogits, dtype=np.float64)
        if g.ndim == 1:
            g = g[None, :]
        n = acts[0].shape[0]
        if g.shape != (n, self.num_classes):
            raise ConfigurationError(
                f"expected logit gradients of shape ({n}, {self.num_classes}), got {g.shape}"
            )
        delta = g / n
        grads: list[tuple[np.ndarray, np.ndarray]] = []
        for layer in range(self.num_layers - 1, -1, -1):
            a_prev = acts[layer]
            grads.append((a_prev.T @ delta, delta.sum(axis=0)))
            if layer > 0:
                da = delta @ self.weights[layer].T
                delta = da * self._act_grad(pre[layer - 1], acts[layer])
        grads.reverse()
        return grads

    def parameter_checksum(self) -> float:
        return float(sum(np.abs(w).sum() + np.abs(b).sum() for w, b in zip(self.weights, self.biases)))


def init_network(cfg: NetConfig) -> Network:
    """Build a network with symmetric-uniform weights scaled by 1/sqrt(fan_in)."""
    rng = np.random.default_rng(cfg.init_seed)
    weights, biases = [], []
    for fan_in, fan_out in cfg.layer_dims:
        limit = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-limit, limit, size=fan_out))
    return Network(weights, biases, cfg.activation)
