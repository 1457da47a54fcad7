"""Small fully-connected Q-network in numpy, with its own backprop and RMSprop."""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"QNET"
FORMAT_VERSION = 1


class QNetwork:
    """ReLU multilayer perceptron mapping a state vector to one value per action.

    Layer ``k`` computes ``W_k @ x + b_k`` with ``W_k`` of shape (out, in);
    every layer but the last is followed by a ReLU.
    """

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator | None = None):
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ValueError(f"bad layer sizes {sizes!r}")
        self.sizes = tuple(int(s) for s in sizes)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for k, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            last = k == len(self.sizes) - 2
            # He-uniform for ReLU layers, a narrower output layer
            limit = np.sqrt((1.0 if last else 6.0) / n_in)
            self.weights.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
            self.biases.append(np.zeros(n_out))

    @property
    def n_actions(self) -> int:
        return self.sizes[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in layer order (W0, b0, W1, b1, ...); mutating them updates the net."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, x) -> np.ndarray:
        h = np.asarray(x, dtype=float)
        n = len(self.weights)
        for k in range(n):
            h = h @ self.weights[k].T + self.biases[k]
            if k < n - 1:
                h = np.maximum(h, 0.0)
        return h

    def forward_cached(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Batched forward pass that keeps each layer's input for backprop."""
        h = np.atleast_2d(np.asarray(x, dtype=float))
        inputs = []
        n = len(self.weights)
        for k in range(n):
            inputs.append(h)
            h = h @ self.weights[k].T + self.biases[k]
            if k < n - 1:
                h = np.maximum(h, 0.0)
        return h, inputs

    def backward(self, inputs: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients in ``params()`` order given dLoss/dOutput for a cached batch."""
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))  # type: ignore[list-item]
        g = grad_out
        for k in range(len(self.weights) - 1, -1, -1):
            h_in = inputs[k]
            grads[2 * k] = g.T @ h_in
            grads[2 * k + 1] = g.sum(axis=0)
            if k > 0:
                # h_in is the ReLU output of layer k-1; its mask is h_in > 0
                g = (g @ self.weights[k]) * (h_in > 0.0)
        return grads

    def copy(self) -> QNetwork:
        other = QNetwork.__new__(QNetwork)
        other.sizes = self.sizes
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def copy_from(self, other: QNetwork) -> None:
        if other.sizes != self.sizes:
            raise ValueError("architecture mismatch")
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())

    def to_bytes(self) -> bytes:
        head = MAGIC + struct.pack("<II", FORMAT_VERSION, len(self.sizes))
        head += struct.pack(f"<{len(self.sizes)}I", *self.sizes)
        body = b"".join(p.astype("<f8").tobytes(order="C") for p in self.params())
        return head + body

    @classmethod
    def from_bytes(cls, data: bytes) -> QNetwork:
        if data[:4] != MAGIC:
            raise ValueError("not a Q-network file (bad magic)")
        version, n = struct.unpack_from("<II", data, 4)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported Q-network format version {version}")
        sizes = struct.unpack_from(f"<{n}I", data, 12)
        offset = 12 + 4 * n
        net = cls.__new__(cls)
        net.sizes = tuple(sizes)
        net.weights, net.biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            w = np.frombuffer(data, "<f8", n_out * n_in, offset).reshape(n_out, n_in)
            offset += w.nbytes
            b = np.frombuffer(data, "<f8", n_out, offset)
            offset += b.nbytes
            net.weights.append(w.astype(float))
            net.biases.append(b.astype(float))
        if offset != len(data):
            raise ValueError("trailing bytes in Q-network file")
        return net

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> QNetwork:
        return cls.from_bytes(Path(path).read_bytes())


def rmsprop_init(params: Sequence[np.ndarray]) -> list[np.ndarray]:
    return [np.zeros_like(p) for p in params]


def rmsprop_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: list[np.ndarray],
    lr: float,
    decay: float = 0.99,
    eps: float = 1e-8,
) -> Sequence[np.ndarray]:
    """One RMSprop update, in place on ``params`` and ``state``.

    v <- decay*v + (1-decay)*g^2 ;  theta <- theta - lr*g/(sqrt(v) + eps)
    """
    for p, g, v in zip(params, grads, state):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        v *= decay
        v += (1.0 - decay) * g * g
        p -= lr * g / (np.sqrt(v) + eps)
    return params
