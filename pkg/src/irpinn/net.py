"""Fully connected tanh network with input-derivative jets and parameter gradients.

Parameters live in one flat float64 vector.  Layer ``l`` occupies a contiguous
slice holding its weight matrix (``w_out x w_in``, row-major) followed by its
bias vector.

Input derivatives ``u_t``, ``u_x`` and ``u_xx`` are obtained by pushing a
second-order jet through every layer; parameter gradients of any loss built
from those jets come from an explicit reverse sweep over the cached layer
activations.  All point reductions use numpy's ``sum`` over the point axis in
ascending index order (pairwise summation), so losses and gradients are
bit-reproducible for a fixed point set.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class ConfigurationError(ValueError):
    """Raised when a parameter vector or checkpoint does not match a network layout."""


class NumericalError(ArithmeticError):
    """Raised when a loss or gradient becomes non-finite."""


class Jet2(NamedTuple):
    """Value of ``u`` with its derivatives ``u_t``, ``u_x`` and ``u_xx``.

    Fields are floats for a single point or arrays over a batch of points.
    """

    val: np.ndarray | float
    d_t: np.ndarray | float
    d_x: np.ndarray | float
    d_xx: np.ndarray | float


@dataclass(frozen=True)
class MLPConfig:
    """Layer widths plus an optional affine map of ``(t, x)`` onto ``[-1, 1]^2``.

    ``input_lower``/``input_upper`` give the ``(t, x)`` box that is rescaled to
    ``[-1, 1]`` before the first layer; ``None`` feeds raw coordinates.
    ``activation`` is ``"tanh"`` for real networks; ``"identity"`` exists for
    tests that need an affine network.
    """

    layer_widths: tuple[int, ...]
    activation: str = "tanh"
    input_lower: tuple[float, float] | None = None
    input_upper: tuple[float, float] | None = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 3:
            raise ConfigurationError("need input, at least one hidden layer and output")
        if widths[0] != 2 or widths[-1] != 1:
            raise ConfigurationError(f"widths must start at 2 and end at 1, got {widths}")
        if any(w < 1 for w in widths):
            raise ConfigurationError(f"widths must be positive, got {widths}")
        if self.activation not in ("tanh", "identity"):
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if (self.input_lower is None) != (self.input_upper is None):
            raise ConfigurationError("input_lower and input_upper must be given together")
        if self.input_lower is not None:
            lo = tuple(float(v) for v in self.input_lower)
            hi = tuple(float(v) for v in self.input_upper)
            if len(lo) != 2 or len(hi) != 2 or not all(a < b for a, b in zip(lo, hi)):
                raise ConfigurationError("input bounds must be two increasing (t, x) pairs")
            object.__setattr__(self, "input_lower", lo)
            object.__setattr__(self, "input_upper", hi)

    @classmethod
    def hidden(cls, n_layers: int, width: int, **kwargs) -> "MLPConfig":
        return cls((2,) + (width,) * n_layers + (1,), **kwargs)

    @property
    def n_params(self) -> int:
        w = self.layer_widths
        return sum(w[i] * w[i + 1] + w[i + 1] for i in range(len(w) - 1))

    def input_scaling(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(scale, shift)`` so that the network sees ``scale * (t, x) + shift``."""
        if self.input_lower is None:
            return np.ones(2), np.zeros(2)
        lo = np.asarray(self.input_lower)
        hi = np.asarray(self.input_upper)
        scale = 2.0 / (hi - lo)
        return scale, -1.0 - scale * lo


def unpack(params: np.ndarray, config: MLPConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views ``(W, b)`` into ``params`` for every layer."""
    params = np.asarray(params)
    if params.ndim != 1 or params.shape[0] != config.n_params:
        raise ConfigurationError(
            f"parameter vector has shape {params.shape}, layout needs ({config.n_params},)"
        )
    layers = []
    offset = 0
    w = config.layer_widths
    for fan_in, fan_out in zip(w[:-1], w[1:]):
        W = params[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in)
        offset += fan_in * fan_out
        b = params[offset:offset + fan_out]
        offset += fan_out
        layers.append((W, b))
    return layers


def init_params(config: MLPConfig, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases, from ``numpy.random.default_rng(seed)``."""
    rng = np.random.default_rng(seed)
    params = np.zeros(config.n_params)
    for W, _ in unpack(params, config):
        fan_out, fan_in = W.shape
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        W[...] = rng.uniform(-bound, bound, size=W.shape)
    return params


def _inputs(config, t, x):
    scale, shift = config.input_scaling()
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    t, x = np.broadcast_arrays(t, x)
    return np.stack([t * scale[0] + shift[0], x * scale[1] + shift[1]], axis=1), scale


def forward(params, config: MLPConfig, t, x):
    """Evaluate ``u(t, x)``; scalar inputs give a float, arrays give an array."""
    scalar = np.ndim(t) == 0 and np.ndim(x) == 0
    layers = unpack(params, config)
    a, _ = _inputs(config, t, x)
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        z = a @ W.T + b
        a = np.tanh(z) if i < last and config.activation == "tanh" else z
    u = a[:, 0]
    return float(u[0]) if scalar else u


class _Tape(NamedTuple):
    # per layer: stacked input jets (4, n, w_in) and, for tanh layers, (s, z jets)
    inputs: list
    acts: list


def _jet_pass(layers, config, t, x):
    a0, scale = _inputs(config, t, x)
    n = a0.shape[0]
    # jet components stacked on axis 0: value, d/dt, d/dx, d2/dx2
    a = np.zeros((4, n, 2))
    a[0] = a0
    a[1, :, 0] = scale[0]
    a[2, :, 1] = scale[1]
    inputs, acts = [], []
    last = len(layers) - 1
    for i, (W, b) in enumerate(layers):
        inputs.append(a)
        # value row uses the same expression as forward() so the two agree bitwise
        z = np.empty((4, n, W.shape[0]))
        z[0] = a[0] @ W.T + b
        z[1:] = (a[1:].reshape(-1, a.shape[-1]) @ W.T).reshape(3, n, -1)
        if i < last and config.activation == "tanh":
            s = np.tanh(z[0])
            ds = 1.0 - s * s
            a = np.empty_like(z)
            a[0] = s
            a[1:] = ds * z[1:]
            a[3] -= 2.0 * s * ds * z[2] * z[2]
            acts.append((s, z))
        else:
            a = z
            acts.append(None)
    return Jet2(a[0, :, 0], a[1, :, 0], a[2, :, 0], a[3, :, 0]), _Tape(inputs, acts)


def forward_jet(params, config: MLPConfig, t, x) -> Jet2:
    """``(u, u_t, u_x, u_xx)`` at the given point(s); ``val`` equals :func:`forward` bitwise."""
    scalar = np.ndim(t) == 0 and np.ndim(x) == 0
    jet, _ = _jet_pass(unpack(params, config), config, t, x)
    if scalar:
        return Jet2(*(float(c[0]) for c in jet))
    return jet


def jet_vjp(params, config: MLPConfig, t, x, cotangent_fn):
    """Forward jet pass followed by a reverse sweep.

    ``cotangent_fn(jet)`` receives the batched output :class:`Jet2` and returns
    ``(loss, cotangent)`` where ``cotangent`` is a :class:`Jet2` of per-point
    derivatives of the scalar loss with respect to each jet component (entries
    may be ``None`` when the loss does not depend on that component).
    Returns ``(loss, gradient)`` with the gradient laid out like ``params``.
    """
    layers = unpack(params, config)
    jet, tape = _jet_pass(layers, config, t, x)
    loss, cot = cotangent_fn(jet)
    n = jet.val.shape[0]
    g = np.zeros((4, n, 1))
    for c, comp in enumerate(cot):
        if comp is not None:
            g[c, :, 0] = comp
    grad = np.zeros(config.n_params)
    grad_layers = unpack(grad, config)
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        dW, db = grad_layers[i]
        act = tape.acts[i]
        if act is not None:
            s, z = act
            ds = 1.0 - s * s
            z_x = z[2]
            g_xx = g[3]
            g_s = (
                g[0]
                - 2.0 * s * np.sum(g[1:] * z[1:], axis=0)
                - 2.0 * g_xx * z_x * z_x * (1.0 - 3.0 * s * s)
            )
            gz = np.empty_like(g)
            gz[0] = g_s * ds
            gz[1:] = g[1:] * ds
            gz[2] -= 4.0 * g_xx * s * ds * z_x
            g = gz
        a_in = tape.inputs[i]
        dW[...] = g.reshape(-1, g.shape[-1]).T @ a_in.reshape(-1, a_in.shape[-1])
        db[...] = g[0].sum(axis=0)
        if i > 0:
            g = (g.reshape(-1, g.shape[-1]) @ W).reshape(4, n, -1)
    return loss, grad


def grad_params(params, loss) -> np.ndarray:
    """Gradient of ``loss`` at ``params``.

    ``loss`` is any object with ``value_and_grad(params) -> (float, ndarray)``;
    the problem losses in :mod:`irpinn.problems` implement it through
    :func:`jet_vjp`.
    """
    value, grad = loss.value_and_grad(params)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise NumericalError(f"non-finite loss or gradient (loss={value!r})")
    return grad


# Checkpoint layout, all little-endian:
#   8 bytes   magic b"IRPINN\x00\x01"
#   uint32    number of widths n
#   uint32[n] layer widths
#   float64[] parameters, exactly sum(w[i]*w[i+1] + w[i+1]) entries
_MAGIC = b"IRPINN\x00\x01"


def save_checkpoint(path, config: MLPConfig, params) -> None:
    params = np.asarray(params, dtype="<f8")
    if params.shape != (config.n_params,):
        raise ConfigurationError("parameter vector does not match config")
    widths = config.layer_widths
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(f"<I{len(widths)}I", len(widths), *widths))
        fh.write(params.tobytes())


def load_checkpoint(path) -> tuple[tuple[int, ...], np.ndarray]:
    """Return ``(layer_widths, params)``; raises :class:`ConfigurationError` on corrupt data."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:8] != _MAGIC:
        raise ConfigurationError(f"{path}: not a checkpoint file")
    (n,) = struct.unpack_from("<I", blob, 8)
    head = 12 + 4 * n
    if n < 3 or len(blob) < head:
        raise ConfigurationError(f"{path}: truncated header")
    widths = struct.unpack_from(f"<{n}I", blob, 12)
    n_params = sum(widths[i] * widths[i + 1] + widths[i + 1] for i in range(n - 1))
    if len(blob) - head != 8 * n_params:
        raise ConfigurationError(
            f"{path}: expected {n_params} parameters, found {(len(blob) - head) / 8}"
        )
    params = np.frombuffer(blob, dtype="<f8", offset=head).astype(np.float64)
    if not np.all(np.isfinite(params)):
        raise ConfigurationError(f"{path}: non-finite parameters")
    return tuple(widths), params


def param_count(widths: Sequence[int]) -> int:
    return sum(widths[i] * widths[i + 1] + widths[i + 1] for i in range(len(widths) - 1))


class FunctionLoss:
    """Wrap a plain ``fun(p)`` and ``grad(p)`` pair as a loss object."""

    def __init__(self, fun, grad):
        self.fun = fun
        self.grad = grad

    def value(self, params) -> float:
        return float(self.fun(params))

    def value_and_grad(self, params):
        return float(self.fun(params)), np.asarray(self.grad(params), dtype=np.float64)
