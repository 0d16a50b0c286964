"""Small dense networks with explicit forward/backward passes.

Plain numpy, float64, no framework: training stays bit-reproducible for a
fixed seed, and the analytic gradients are simple enough to verify against
finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

ACTIVATIONS = ("relu", "identity")


def stable_sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form avoids exp overflow without branching
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class DenseLayer:
    weights: np.ndarray  # (in_dim, out_dim)
    biases: np.ndarray  # (out_dim,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if self.weights.ndim != 2 or self.biases.shape != (self.weights.shape[1],):
            raise ValueError(
                f"layer shape mismatch: weights {self.weights.shape}, biases {self.biases.shape}"
            )


class DenseNetwork:
    """Chain of dense layers; activations are relu or identity."""

    def __init__(self, layers: List[DenseLayer]):
        if not layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.weights.shape[1] != b.weights.shape[0]:
                raise ValueError("adjacent layer dimensions must chain")
        self.layers = layers

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weights.shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def forward_cached(self, x: np.ndarray):
        """Forward pass keeping (input, pre-activation) per layer for backprop."""
        cache = []
        a = x
        for layer in self.layers:
            z = a @ layer.weights + layer.biases
            cache.append((a, z))
            a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        return a, cache

    def backward(self, cache, dy: np.ndarray):
        """Gradients of a scalar loss given d loss / d output.

        Returns (dx, grads) with grads a list of (dW, db) matching layers.
        Inputs may be batched (N, dim); parameter gradients are summed over
        the batch.
        """
        grads: List[Tuple[np.ndarray, np.ndarray]] = [None] * len(self.layers)
        da = dy
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            x, z = cache[i]
            dz = da * (z > 0.0) if layer.activation == "relu" else da
            if x.ndim == 1:
                grads[i] = (np.outer(x, dz), dz.copy())
            else:
                grads[i] = (x.T @ dz, dz.sum(axis=0))
            da = dz @ layer.weights.T
        return da, grads

    def copy(self) -> "DenseNetwork":
        return DenseNetwork(
            [
                DenseLayer(l.weights.copy(), l.biases.copy(), l.activation)
                for l in self.layers
            ]
        )

    def apply_gradients(self, grads, lr: float) -> None:
        for layer, (dw, db) in zip(self.layers, grads):
            layer.weights -= lr * dw
            layer.biases -= lr * db

    def parameter_count(self) -> int:
        return sum(l.weights.size + l.biases.size for l in self.layers)


def build_network(dims: List[int], activations: List[str], rng: np.random.Generator,
                  weight_init_scale: float = 1.0) -> DenseNetwork:
    """Seeded init: weights uniform in [-s, s] with s = scale / sqrt(fan_in), zero biases."""
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for i, act in enumerate(activations):
        fan_in = dims[i]
        s = weight_init_scale / np.sqrt(fan_in)
        w = rng.uniform(-s, s, size=(fan_in, dims[i + 1]))
        layers.append(DenseLayer(weights=w, biases=np.zeros(dims[i + 1]), activation=act))
    return DenseNetwork(layers)


def network_to_dict(net: DenseNetwork) -> dict:
    return {
        "layers": [
            {
                "in_dim": int(l.weights.shape[0]),
                "out_dim": int(l.weights.shape[1]),
                "activation": l.activation,
                "weights": [float(v) for v in l.weights.ravel()],
                "biases": [float(v) for v in l.biases],
            }
            for l in net.layers
        ]
    }


def network_from_dict(data: dict) -> DenseNetwork:
    layers = []
    for l in data["layers"]:
        w = np.asarray(l["weights"], dtype=float).reshape(l["in_dim"], l["out_dim"])
        layers.append(
            DenseLayer(weights=w, biases=np.asarray(l["biases"], dtype=float), activation=l["activation"])
        )
    return DenseNetwork(layers)
