"""Bias-corrected Adam on flat parameter vectors."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .net import ConfigurationError, NumericalError


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)

    def copy(self) -> "AdamState":
        return AdamState(self.m.copy(), self.v.copy(), self.step_count)


def adam_step(state: AdamState, params, grad, cfg: AdamConfig) -> tuple[np.ndarray, AdamState]:
    """One Adam update; returns new ``(params, state)`` and leaves the inputs untouched."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape or state.m.shape != params.shape:
        raise ConfigurationError("params, grad and Adam moments must share one shape")
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient passed to adam_step")
    step = state.step_count + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * (grad * grad)
    m_hat = m / (1.0 - cfg.beta1**step)
    v_hat = v / (1.0 - cfg.beta2**step)
    new = params - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return new, AdamState(m, v, step)


# Optimizer state file: uint64 step_count, uint64 n, float64[n] m, float64[n] v (little-endian)
def save_adam_state(path, state: AdamState) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", state.step_count, state.m.shape[0]))
        fh.write(np.asarray(state.m, dtype="<f8").tobytes())
        fh.write(np.asarray(state.v, dtype="<f8").tobytes())


def load_adam_state(path) -> AdamState:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise ConfigurationError(f"{path}: truncated optimizer state")
    step, n = struct.unpack_from("<QQ", blob, 0)
    if len(blob) != 16 + 16 * n:
        raise ConfigurationError(f"{path}: size does not match {n} parameters")
    m = np.frombuffer(blob, dtype="<f8", count=n, offset=16).astype(np.float64)
    v = np.frombuffer(blob, dtype="<f8", count=n, offset=16 + 8 * n).astype(np.float64)
    return AdamState(m, v, step)
