"""Small feedforward networks with explicit reverse-mode gradients.

Everything is float64: the CCA eigensolves and the finite-difference
gradient checks need the headroom.  A net is single-writer during
training; read-only inference may be shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import TrainingDivergedError
from .validation import as_matrix

ACTIVATIONS = ("tanh", "relu", "identity")

CHECKPOINT_VERSION = 1


def _activate(name: str, A: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(A)
    if name == "relu":
        return np.maximum(A, 0.0)
    return A


def _activation_grad(name: str, A: np.ndarray, H: np.ndarray) -> np.ndarray:
    # H is the cached pre-dropout activation output
    if name == "tanh":
        return 1.0 - H * H
    if name == "relu":
        return (A > 0.0).astype(np.float64)
    return np.ones_like(A)


@dataclass
class MlpGradients:
    """Parameter gradients plus the gradient w.r.t. the network input."""

    weights: list
    biases: list
    inputs: np.ndarray


class Mlp:
    """Fully connected network with cached activations for backprop.

    Parameters
    ----------
    layer_sizes : sequence of int
        [input, hidden..., output] widths.
    activations : str or sequence of str, optional
        Per-layer choice from {"tanh", "relu", "identity"}.  A single
        string applies to all hidden layers with an identity output;
        default is tanh hidden layers.
    dropout : float
        Inverted-dropout probability on hidden activations, active only
        in training mode.
    seed : int, optional
        Seed for the Xavier-uniform weight initialisation.
    """

    def __init__(self, layer_sizes, activations=None, dropout=0.0, seed=None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"layer_sizes must be >= 2 positive widths, got {sizes}")
        n_layers = len(sizes) - 1
        if activations is None:
            activations = ["tanh"] * (n_layers - 1) + ["identity"]
        elif isinstance(activations, str):
            activations = [activations] * (n_layers - 1) + ["identity"]
        else:
            activations = list(activations)
        if len(activations) != n_layers:
            raise ValueError(
                f"got {len(activations)} activations for {n_layers} layers"
            )
        for act in activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        if not 0.0 <= dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {dropout}")

        self.layer_sizes = sizes
        self.activations = activations
        self.dropout = float(dropout)
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._cache = None

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def forward(self, X, training=False, rng=None) -> np.ndarray:
        """Run the net; caches activations for a subsequent backward().

        Dropout is applied to hidden activations only when ``training`` is
        true, drawing masks from ``rng``.
        """
        X = as_matrix(X, "X")
        if X.shape[1] != self.input_dim:
            raise ValueError(
                f"X has {X.shape[1]} columns, net expects {self.input_dim}"
            )
        use_dropout = training and self.dropout > 0.0
        if use_dropout and rng is None:
            raise ValueError("training-mode dropout requires an rng")
        inputs = [X]
        pre, post, masks = [], [], []
        H = X
        for l in range(self.n_layers):
            A = H @ self.weights[l] + self.biases[l]
            Ha = _activate(self.activations[l], A)
            if use_dropout and l < self.n_layers - 1:
                mask = (rng.random(Ha.shape) >= self.dropout) / (1.0 - self.dropout)
                H = Ha * mask
            else:
                mask = None
                H = Ha
            pre.append(A)
            post.append(Ha)
            masks.append(mask)
            inputs.append(H)
        self._cache = (inputs, pre, post, masks)
        return H

    def backward(self, upstream) -> MlpGradients:
        """Exact reverse-mode gradients for the most recent forward pass."""
        if self._cache is None:
            raise RuntimeError("backward() requires a prior forward() on this net")
        inputs, pre, post, masks = self._cache
        G = np.asarray(upstream, dtype=np.float64)
        if G.shape != inputs[-1].shape:
            raise ValueError(
                f"upstream gradient shape {G.shape} does not match output "
                f"shape {inputs[-1].shape}"
            )
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        for l in reversed(range(self.n_layers)):
            if masks[l] is not None:
                G = G * masks[l]
            dA = G * _activation_grad(self.activations[l], pre[l], post[l])
            grads_w[l] = inputs[l].T @ dA
            grads_b[l] = dA.sum(axis=0)
            G = dA @ self.weights[l].T
        return MlpGradients(weights=grads_w, biases=grads_b, inputs=G)

    def copy_parameters(self):
        return ([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def set_parameters(self, params) -> None:
        weights, biases = params
        for W, src in zip(self.weights, weights):
            W[...] = src
        for b, src in zip(self.biases, biases):
            b[...] = src


def _check_grads_finite(grads: MlpGradients) -> None:
    for g in (*grads.weights, *grads.biases):
        if not np.isfinite(g).all():
            raise TrainingDivergedError("non-finite gradients")


def _check_params_finite(net: Mlp) -> None:
    for p in (*net.weights, *net.biases):
        if not np.isfinite(p).all():
            raise TrainingDivergedError("non-finite parameters after update")


class Sgd:
    """Plain stochastic gradient descent: p <- p - lr * g."""

    def __init__(self, learning_rate=1e-2):
        self.learning_rate = float(learning_rate)
        self.steps = 0

    def step(self, net: Mlp, grads: MlpGradients) -> Mlp:
        _check_grads_finite(grads)
        for W, g in zip(net.weights, grads.weights):
            W -= self.learning_rate * g
        for b, g in zip(net.biases, grads.biases):
            b -= self.learning_rate * g
        self.steps += 1
        _check_params_finite(net)
        return net


class Adam:
    """Adam with standard bias correction (beta1=0.9, beta2=0.999)."""

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = float(learning_rate)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.steps = 0
        self._m = None
        self._v = None

    def step(self, net: Mlp, grads: MlpGradients) -> Mlp:
        _check_grads_finite(grads)
        params = [*net.weights, *net.biases]
        gs = [*grads.weights, *grads.biases]
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.steps += 1
        t = self.steps
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, gs, self._m, self._v):
            m[...] = b1 * m + (1.0 - b1) * g
            v[...] = b2 * v + (1.0 - b2) * (g * g)
            m_hat = m / (1.0 - b1**t)
            v_hat = v / (1.0 - b2**t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        _check_params_finite(net)
        return net


def make_optimizer(kind: str, learning_rate: float):
    if kind == "sgd":
        return Sgd(learning_rate)
    if kind == "adam":
        return Adam(learning_rate)
    raise ValueError(f"unknown optimizer kind {kind!r}")


def save_checkpoint(net: Mlp, path) -> None:
    """Write a versioned checkpoint; round-trips bit-exactly."""
    arrays = {
        "format_version": np.int64(CHECKPOINT_VERSION),
        "layer_sizes": np.asarray(net.layer_sizes, dtype=np.int64),
        "activations": np.asarray(net.activations),
        "dropout": np.float64(net.dropout),
    }
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"W{i}"] = W
        arrays[f"b{i}"] = b
    np.savez(path, **arrays)


def load_checkpoint(path) -> Mlp:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = [int(s) for s in data["layer_sizes"]]
        activations = [str(a) for a in data["activations"]]
        net = Mlp(sizes, activations, dropout=float(data["dropout"]))
        for i in range(net.n_layers):
            net.weights[i] = data[f"W{i}"].copy()
            net.biases[i] = data[f"b{i}"].copy()
    return net
