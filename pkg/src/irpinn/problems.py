"""PINN benchmark problems: viscous Burgers and the 1-D heat equation.

Each problem bundles its domain, PDE residual, initial/boundary data sampler
and a reference solution.  The two training losses are

* ``MSE_u``: mean squared mismatch against initial/boundary targets,
* ``MSE_f``: mean squared PDE residual over collocation points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import roots_hermite
from scipy.stats import qmc

from .net import Jet2, MLPConfig, forward, forward_jet, jet_vjp

BURGERS_NU = 0.01 / np.pi
HEAT_K = 1.0
HEAT_L = 10.0


@dataclass(frozen=True)
class Domain:
    t_min: float
    t_max: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if not (self.t_min < self.t_max and self.x_min < self.x_max):
            raise ValueError(f"degenerate domain {self}")

    @property
    def lower(self) -> tuple[float, float]:
        return (self.t_min, self.x_min)

    @property
    def upper(self) -> tuple[float, float]:
        return (self.t_max, self.x_max)

    def contains(self, t, x) -> np.ndarray:
        t = np.asarray(t)
        x = np.asarray(x)
        return (t >= self.t_min) & (t <= self.t_max) & (x >= self.x_min) & (x <= self.x_max)


BURGERS_DOMAIN = Domain(0.0, 1.0, -1.0, 1.0)
HEAT_DOMAIN = Domain(0.0, 5.0, 0.0, HEAT_L)


@dataclass
class PointSet:
    """``collocation`` has columns (t, x); ``data`` has columns (t, x, target)."""

    collocation: np.ndarray
    data: np.ndarray

    def to_csv(self, collocation_path, data_path) -> None:
        rows = np.column_stack([self.collocation, np.zeros(len(self.collocation))])
        write_txv_csv(collocation_path, rows)
        write_txv_csv(data_path, self.data)


def write_txv_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "value"])
        for t, x, v in np.asarray(rows, dtype=np.float64):
            w.writerow([repr(float(t)), repr(float(x)), repr(float(v))])


def lhs_sample(n: int, domain: Domain, seed: int) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in ``domain`` as an ``(n, 2)`` array of (t, x)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    unit = qmc.LatinHypercube(d=2, seed=np.random.default_rng(seed)).random(n)
    return qmc.scale(unit, domain.lower, domain.upper)


def _boundary_split(n_u: int) -> tuple[int, int, int]:
    # initial / left / right in a 50/25/25 ratio
    n_init = n_u // 2
    n_left = (n_u - n_init) // 2
    return n_init, n_left, n_u - n_init - n_left


def _sample_data(n_u, seed, domain, initial: Callable, boundary_value: float) -> np.ndarray:
    if n_u < 3:
        raise ValueError("need at least 3 data points (initial, left and right boundary)")
    rng = np.random.default_rng(seed)
    n_init, n_left, n_right = _boundary_split(n_u)
    x0 = rng.uniform(domain.x_min, domain.x_max, n_init)
    t_left = rng.uniform(domain.t_min, domain.t_max, n_left)
    t_right = rng.uniform(domain.t_min, domain.t_max, n_right)
    init = np.column_stack([np.full(n_init, domain.t_min), x0, initial(x0)])
    left = np.column_stack([t_left, np.full(n_left, domain.x_min), np.full(n_left, boundary_value)])
    right = np.column_stack(
        [t_right, np.full(n_right, domain.x_max), np.full(n_right, boundary_value)]
    )
    return np.vstack([init, left, right])


def burgers_initial(x):
    return -np.sin(np.pi * np.asarray(x, dtype=np.float64))


def heat_initial(x, length: float = HEAT_L):
    x = np.asarray(x, dtype=np.float64)
    return np.sin(np.pi * x / length) + np.sin(3.0 * np.pi * x / length)


def burgers_data(n_u: int, seed: int) -> np.ndarray:
    """Initial/boundary points with targets ``-sin(pi x)`` at t=0 and 0 at x=+-1."""
    return _sample_data(n_u, seed, BURGERS_DOMAIN, burgers_initial, 0.0)


def heat_data(n_u: int, seed: int) -> np.ndarray:
    """Initial/boundary points with the two-mode sine initial state and zero walls."""
    return _sample_data(n_u, seed, HEAT_DOMAIN, heat_initial, 0.0)


def burgers_data_target(t, x):
    """Target value of the Burgers data term at a point on the initial line or walls."""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return np.where((t == 0.0) & (np.abs(x) < 1.0), burgers_initial(x), 0.0)


def heat_data_target(t, x):
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    on_wall = (x == 0.0) | (x == HEAT_L)
    return np.where((t == 0.0) & ~on_wall, heat_initial(x), 0.0)


def residual_burgers(j: Jet2, nu: float = BURGERS_NU):
    return j.d_t + j.val * j.d_x - nu * j.d_xx


def residual_heat(j: Jet2, k: float = HEAT_K):
    return j.d_t - k * j.d_xx


class BurgersResidual:
    """Residual ``u_t + u u_x - nu u_xx`` with its partials in each jet component."""

    def __init__(self, nu: float = BURGERS_NU):
        self.nu = nu

    def __call__(self, j: Jet2):
        return residual_burgers(j, self.nu)

    def partials(self, j: Jet2) -> Jet2:
        return Jet2(j.d_x, 1.0, j.val, -self.nu)


class HeatResidual:
    """Residual ``u_t - k u_xx``."""

    def __init__(self, k: float = HEAT_K):
        self.k = k

    def __call__(self, j: Jet2):
        return residual_heat(j, self.k)

    def partials(self, j: Jet2) -> Jet2:
        return Jet2(None, 1.0, None, -self.k)


class DataLoss:
    """``MSE_u`` over a fixed set of (t, x, target) rows."""

    def __init__(self, config: MLPConfig, data):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != 3:
            raise ValueError("data must be a non-empty (n, 3) array of (t, x, target)")
        self.config = config
        self.t, self.x, self.target = data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy()

    def value(self, params) -> float:
        err = forward(params, self.config, self.t, self.x) - self.target
        return float(np.sum(err * err) / err.shape[0])

    def value_and_grad(self, params):
        def cot(jet):
            err = jet.val - self.target
            n = err.shape[0]
            return float(np.sum(err * err) / n), Jet2(2.0 * err / n, None, None, None)

        return jet_vjp(params, self.config, self.t, self.x, cot)


class ResidualLoss:
    """``MSE_f``: mean squared PDE residual over collocation points."""

    def __init__(self, config: MLPConfig, residual, collocation):
        pts = np.asarray(collocation, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0 or pts.shape[1] < 2:
            raise ValueError("collocation must be a non-empty (n, 2) array of (t, x)")
        self.config = config
        self.residual = residual
        self.t, self.x = pts[:, 0].copy(), pts[:, 1].copy()

    def value(self, params) -> float:
        r = self.residual(forward_jet(params, self.config, self.t, self.x))
        return float(np.sum(r * r) / r.shape[0])

    def value_and_grad(self, params):
        def cot(jet):
            r = self.residual(jet)
            n = r.shape[0]
            scale = 2.0 * r / n
            parts = self.residual.partials(jet)
            return float(np.sum(r * r) / n), Jet2(
                *(None if p is None else scale * p for p in parts)
            )

        return jet_vjp(params, self.config, self.t, self.x, cot)


def mse_u(params, config: MLPConfig, data) -> float:
    return DataLoss(config, data).value(params)


def mse_f(params, config: MLPConfig, residual, collocation) -> float:
    return ResidualLoss(config, residual, collocation).value(params)


def reference_burgers(t, x, nu: float = BURGERS_NU, n_nodes: int = 100):
    """Exact viscous Burgers solution for ``u(0, x) = -sin(pi x)`` via Cole-Hopf.

    Writes the solution as a ratio of Gaussian-weighted integrals and evaluates
    both with ``n_nodes``-point Gauss-Hermite quadrature.  The exponent is
    shifted by its maximum over the nodes before exponentiating so the
    ``exp(-cos / (2 pi nu))`` factor cannot overflow.
    """
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    t, x = np.broadcast_arrays(t, x)
    z, w = roots_hermite(n_nodes)
    c = 2.0 * np.sqrt(nu * np.maximum(t, 0.0))
    y = x[..., None] - c[..., None] * z
    expo = -np.cos(np.pi * y) / (2.0 * np.pi * nu)
    expo -= expo.max(axis=-1, keepdims=True)
    f = w * np.exp(expo)
    u = -np.sum(f * np.sin(np.pi * y), axis=-1) / np.sum(f, axis=-1)
    u = np.where(t > 0.0, u, burgers_initial(x))
    return u if u.ndim else float(u)


def reference_heat(t, x, k: float = HEAT_K, length: float = HEAT_L):
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    a1 = np.pi / length
    a3 = 3.0 * np.pi / length
    # same sine arguments as heat_initial so t=0 reproduces it exactly
    u = (np.exp(-k * a1 * a1 * t) * np.sin(np.pi * x / length)
         + np.exp(-k * a3 * a3 * t) * np.sin(3.0 * np.pi * x / length))
    return u if np.ndim(u) else float(u)


def reference_heat_jet(t, x, k: float = HEAT_K, length: float = HEAT_L) -> Jet2:
    """Hand-differentiated ``(u, u_t, u_x, u_xx)`` of :func:`reference_heat`."""
    t = np.asarray(t, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    val = d_t = d_x = d_xx = 0.0
    for a in (np.pi / length, 3.0 * np.pi / length):
        decay = np.exp(-k * a * a * t)
        s, c = np.sin(a * x), np.cos(a * x)
        val = val + decay * s
        d_t = d_t + (-k * a * a) * decay * s
        d_x = d_x + a * decay * c
        d_xx = d_xx + (-a * a) * decay * s
    return Jet2(val, d_t, d_x, d_xx)


@dataclass
class ProblemSpec:
    name: str
    domain: Domain
    residual: object
    data_sampler: Callable[[int, int], np.ndarray]
    reference: Callable
    report_times: tuple[float, ...]
    constants: dict = field(default_factory=dict)

    def points(self, n_collocation: int, n_data: int, seed: int) -> PointSet:
        """Collocation and data points, generated once per run from ``seed``."""
        return PointSet(
            lhs_sample(n_collocation, self.domain, seed),
            self.data_sampler(n_data, seed + 1),
        )

    def losses(self, config: MLPConfig, points: PointSet) -> tuple[DataLoss, ResidualLoss]:
        """``(MSE_u, MSE_f)`` loss objects for ``points``."""
        return DataLoss(config, points.data), ResidualLoss(config, self.residual, points.collocation)


def get_problem(name: str) -> ProblemSpec:
    if name == "burgers":
        return ProblemSpec(
            "burgers",
            BURGERS_DOMAIN,
            BurgersResidual(),
            burgers_data,
            reference_burgers,
            (0.25, 0.5, 0.75),
            {"nu": BURGERS_NU},
        )
    if name == "heat":
        return ProblemSpec(
            "heat",
            HEAT_DOMAIN,
            HeatResidual(),
            heat_data,
            reference_heat,
            (1.0, 2.5, 4.0),
            {"k": HEAT_K, "L": HEAT_L},
        )
    raise ValueError(f"unknown problem {name!r} (expected 'burgers' or 'heat')")
