"""Minimal dense network with hand-written gradients.

Kept dependency-free on purpose so the whole learning stack is inspectable:
relu hidden layers, linear head, squared error on the taken action's value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class QNetwork:
    """Fully connected net mapping an encoded observation to one value per action."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]) -> None:
        if len(weights) != len(biases) or not weights:
            raise ValueError("need matching, non-empty weight and bias lists")
        for w, b in zip(weights, biases):
            if w.shape[0] != b.shape[0]:
                raise ValueError(f"bias shape {b.shape} does not match weight {w.shape}")
        for w_in, w_out in zip(weights, weights[1:]):
            if w_out.shape[1] != w_in.shape[0]:
                raise ValueError("consecutive layer shapes do not chain")
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]

    @classmethod
    def create(cls, dims: tuple[int, ...], rng: np.random.Generator) -> "QNetwork":
        """He-initialized net; dims = (input, hidden..., n_actions)."""
        if len(dims) < 2 or any(d <= 0 for d in dims):
            raise ValueError(f"bad layer dims {dims}")
        weights, biases = [], []
        for d_in, d_out in zip(dims, dims[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_out, d_in)))
            biases.append(np.zeros(d_out))
        return cls(weights, biases)

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def copy(self) -> "QNetwork":
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Values for a single observation (d,) -> (n_actions,) or a batch
        (B, d) -> (B, n_actions)."""
        single = x.ndim == 1
        h = np.atleast_2d(np.asarray(x, dtype=float))
        if h.shape[1] != self.dims[0]:
            raise ValueError(f"input width {h.shape[1]} != expected {self.dims[0]}")
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w.T + b, 0.0)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out[0] if single else out

    def loss_grads(
        self, x: np.ndarray, actions: np.ndarray, targets: np.ndarray
    ) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """Mean squared error of Q(x)[action] against targets, with exact
        gradients for every weight and bias."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        actions = np.asarray(actions, dtype=int)
        targets = np.asarray(targets, dtype=float)
        batch = x.shape[0]
        if actions.shape != (batch,) or targets.shape != (batch,):
            raise ValueError("actions and targets must be 1-d of batch length")

        # forward with cached activations
        acts = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w.T + b, 0.0)
            acts.append(h)
        q = h @ self.weights[-1].T + self.biases[-1]

        picked = q[np.arange(batch), actions]
        err = picked - targets
        loss = float(np.mean(err**2))

        # backward
        dq = np.zeros_like(q)
        dq[np.arange(batch), actions] = 2.0 * err / batch
        grads_w: list[np.ndarray] = [None] * len(self.weights)
        grads_b: list[np.ndarray] = [None] * len(self.biases)
        delta = dq
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = delta.T @ acts[layer]
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer]) * (acts[layer] > 0.0)
        return loss, grads_w, grads_b

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "QNetwork":
        net = cls(
            [np.array(w, dtype=float) for w in doc["weights"]],
            [np.array(b, dtype=float) for b in doc["biases"]],
        )
        if list(net.dims) != list(doc["dims"]):
            raise ValueError("stored dims do not match stored weights")
        return net


def global_norm(arrays: list[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(a**2)) for a in arrays)))


def clip_by_global_norm(arrays: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    norm = global_norm(arrays)
    if norm <= max_norm or norm == 0.0:
        return arrays
    scale = max_norm / norm
    return [a * scale for a in arrays]


def soft_update(target: QNetwork, online: QNetwork, tau: float) -> None:
    """Move target weights a fraction tau toward the online net, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    for t, o in zip(target.weights, online.weights):
        t *= 1.0 - tau
        t += tau * o
    for t, o in zip(target.biases, online.biases):
        t *= 1.0 - tau
        t += tau * o


@dataclass
class Adam:
    """Adam with weight decay and global-norm gradient clipping."""

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float | None = None
    _m: list[np.ndarray] = field(default_factory=list)
    _v: list[np.ndarray] = field(default_factory=list)
    _t: int = 0

    def step(self, net: QNetwork, grads_w: list[np.ndarray], grads_b: list[np.ndarray]) -> None:
        params = net.weights + net.biases
        grads = [g.copy() for g in grads_w + grads_b]
        if self.weight_decay:
            # decay applies to weights only
            for i, w in enumerate(net.weights):
                grads[i] += self.weight_decay * w
        if self.clip_norm is not None:
            grads = clip_by_global_norm(grads, self.clip_norm)
        if not self._m:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        b1c = 1.0 - self.beta1**self._t
        b2c = 1.0 - self.beta2**self._t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g**2
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
