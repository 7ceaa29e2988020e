"""Shared numerical kernels: stable transcendentals, Adam, and seeded randomness.

Everything trains in float64. Reductions are plain numpy ops with a fixed
evaluation order, so a (config, seed) pair reproduces results bitwise.
"""

from __future__ import annotations

import numpy as np


class NumericalError(RuntimeError):
    """A computation produced or received non-finite values."""


def log_softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-shifted log-softmax; exp of the result sums to 1 along `axis`."""
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("log_softmax: non-finite input")
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise NumericalError("softmax: non-finite input")
    shifted = np.exp(logits - np.max(logits, axis=axis, keepdims=True))
    return shifted / np.sum(shifted, axis=axis, keepdims=True)


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) without overflow for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class SeededRng:
    """PCG64-backed generator; identical seed implies identical sample stream.

    A training run owns exactly one instance and consumes it in a fixed,
    documented order (parameter init, then per-epoch shuffles, then per-batch
    noise), which is what makes runs bitwise reproducible per seed.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def standard_normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(size=shape, dtype=np.float64)

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def sample_without_replacement(self, n: int, k: int) -> np.ndarray:
        """k distinct indices drawn from range(n)."""
        return self._gen.choice(n, size=k, replace=False)


def sample_standard_normal(rng: SeededRng, n: int) -> np.ndarray:
    """Vector of n iid N(0, 1) draws; deterministic under a fixed seed."""
    if n < 1:
        raise ValueError("sample_standard_normal: n must be >= 1")
    return rng.standard_normal(n)


class Adam:
    """Bias-corrected Adam over a named set of float64 tensors.

    Moment accumulators are allocated lazily per tensor name and always match
    the parameter shapes. `step` mutates the parameter arrays in place.
    """

    def __init__(self, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if eps <= 0:
            raise ValueError("Adam: eps must be positive")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if name not in params:
                raise ValueError(f"Adam: gradient for unknown tensor '{name}'")
            if g.shape != params[name].shape:
                raise ValueError(
                    f"Adam: shape mismatch for '{name}': "
                    f"param {params[name].shape} vs grad {g.shape}")
            if not np.all(np.isfinite(g)):
                raise NumericalError(f"Adam: non-finite gradient for tensor '{name}'")

        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            if name not in self._m:
                self._m[name] = np.zeros_like(params[name])
                self._v[name] = np.zeros_like(params[name])
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            params[name] -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
