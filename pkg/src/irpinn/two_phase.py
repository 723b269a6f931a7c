"""Two-phase inexact-restoration training for a pair of non-negative losses.

``L2`` plays the feasibility role and ``L1`` the objective role.  Every outer
iteration (epoch) ``k``:

1. restoration: Adam on ``L2`` from ``x`` until ``L2(y) <= r L2(x)``;
2. penalty update: keep ``theta`` if ``y`` already decreases the merit
   ``Phi(., theta) = theta L1 + (1 - theta) L2`` enough, otherwise solve for
   the ``theta`` at which it does;
3. optimization: Adam on ``alpha L1 + beta L2`` from ``y`` until
   ``L1(z) <= L1(y)`` and ``Phi(z, theta') <= Phi(x, theta') - c L2(x)``;
4. ``x <- z``.

Each Adam step inside a phase is one internal iteration.  A phase gives up
after ``it_max`` steps and hands back its best iterate instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .adam import AdamConfig, AdamState, adam_step
from .net import NumericalError

log = logging.getLogger(__name__)

RESTORATION = "restoration"
OPTIMIZATION = "optimization"

VARIANTS = ("paper", "one_minus_r_squared")


@dataclass(frozen=True)
class IRConfig:
    """Hyperparameters of the two-phase method.

    ``decrement_variant="paper"`` uses ``(1-r)^2 / 2`` in both descent tests
    and the printed update formula for ``theta`` (the two agree algebraically).
    ``"one_minus_r_squared"`` uses ``(1-r^2) / 2`` in the tests together with
    the matching ``theta`` formula.

    ``accept_null_step`` lets the optimization phase return ``y`` untouched when
    ``d = 0`` already passes both tests.  After a successful restoration that
    is always the case, so enabling it turns the optimization phase off.
    """

    r: float = 0.99
    theta0: float = 0.8
    it_max: int = 150
    alpha: float = 0.5
    beta: float = 4.0
    budget: int = 20_000
    decrement_variant: str = "paper"
    theta_min: float = 1e-8
    adam: AdamConfig = field(default_factory=AdamConfig)
    reset_adam_per_phase: bool = False
    accept_null_step: bool = False

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ValueError("r must lie in (0, 1)")
        if not 0 < self.theta0 < 1:
            raise ValueError("theta0 must lie in (0, 1)")
        if self.it_max < 1:
            raise ValueError("it_max must be >= 1")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")
        if self.decrement_variant not in VARIANTS:
            raise ValueError(f"decrement_variant must be one of {VARIANTS}")
        if not 0 < self.theta_min < self.theta0:
            raise ValueError("theta_min must lie in (0, theta0)")

    @property
    def forcing(self) -> float:
        """Coefficient ``c`` of ``L2(x)`` in the sufficient-decrease tests."""
        if self.decrement_variant == "paper":
            return 0.5 * (1.0 - self.r) ** 2
        return 0.5 * (1.0 - self.r * self.r)


@dataclass
class HistoryRecord:
    internal_iter: int
    epoch: int
    phase: str
    L1: float
    L2: float
    sum: float
    phi: float
    theta: float
    cond_ok: bool


@dataclass
class PhaseReport:
    iterations_used: int
    condition_satisfied: bool
    L1: float
    L2: float
    phi: float
    truncated: bool = False


@dataclass
class EpochRecord:
    """Loss values of one outer iteration, exactly as used in its tests."""

    epoch: int
    theta: float
    theta_next: float
    L1_x: float
    L2_x: float
    L1_y: float
    L2_y: float
    L1_new: float
    L2_new: float
    restoration: PhaseReport
    optimization: PhaseReport | None
    completed: bool

    @property
    def phi_x_next(self) -> float:
        return penalty_phi(self.L1_x, self.L2_x, self.theta_next)

    @property
    def phi_new(self) -> float:
        return penalty_phi(self.L1_new, self.L2_new, self.theta_next)


@dataclass
class IRState:
    x: np.ndarray
    theta: float
    k: int = 0
    internal_iters: int = 0
    adam_restoration: AdamState | None = None
    adam_optimization: AdamState | None = None
    history: list[HistoryRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)


@dataclass
class _Point:
    # an iterate with its cached loss values; gradients are filled on demand
    x: np.ndarray
    l1: float
    l2: float
    g1: np.ndarray | None = None
    g2: np.ndarray | None = None


def penalty_phi(l1: float, l2: float, theta: float) -> float:
    return theta * l1 + (1.0 - theta) * l2


def restoration_ok(l2y: float, l2x: float, r: float) -> bool:
    return l2y <= r * l2x


def optimization_ok(l1z, l2z, l1y, l1x, l2x, theta_next, cfg: IRConfig) -> bool:
    target = penalty_phi(l1x, l2x, theta_next) - cfg.forcing * l2x
    return l1z <= l1y and penalty_phi(l1z, l2z, theta_next) <= target


def update_theta(l1x, l2x, l1y, l2y, theta_k, cfg: IRConfig) -> float:
    """Penalty parameter for the optimization phase, never above ``theta_k``."""
    c = cfg.forcing
    if penalty_phi(l1y, l2y, theta_k) <= penalty_phi(l1x, l2x, theta_k) - c * l2x:
        return theta_k
    den = l1y - l1x + l2x - l2y
    if abs(den) <= cfg.theta_min:
        return theta_k
    r = cfg.r
    if cfg.decrement_variant == "paper":
        num = 0.5 * (1.0 - r * r) * l2x + r * l2x - l2y
    else:
        num = (1.0 - c) * l2x - l2y
    return min(max(num / den, cfg.theta_min), theta_k)


def _check(value, where, state):
    if not math.isfinite(value):
        raise NumericalError(
            f"non-finite loss {value!r} in {where} "
            f"(epoch {state.k}, internal iteration {state.internal_iters})"
        )
    return value


def _fresh_adam(state: IRState, attr: str, cfg: IRConfig) -> AdamState:
    current = getattr(state, attr)
    if current is None or cfg.reset_adam_per_phase:
        return AdamState.zeros(state.x.shape[0])
    return current


class TwoPhaseTrainer:
    """Runs the two-phase method on losses ``l1`` and ``l2``.

    Both losses expose ``value(p)`` and ``value_and_grad(p)``.  ``on_record``
    is called with every :class:`HistoryRecord` as it is produced and
    ``on_epoch`` with ``(state, EpochRecord)`` after every outer iteration.
    """

    def __init__(self, l1, l2, cfg: IRConfig, on_record=None, on_epoch=None):
        self.l1 = l1
        self.l2 = l2
        self.cfg = cfg
        self.on_record = on_record
        self.on_epoch = on_epoch

    def _record(self, state, phase, l1, l2, theta, ok):
        rec = HistoryRecord(
            internal_iter=state.internal_iters,
            epoch=state.k,
            phase=phase,
            L1=l1,
            L2=l2,
            sum=l1 + l2,
            phi=penalty_phi(l1, l2, theta),
            theta=theta,
            cond_ok=bool(ok),
        )
        state.history.append(rec)
        if self.on_record is not None:
            self.on_record(rec)

    def evaluate(self, x, state, where) -> _Point:
        l1, g1 = self.l1.value_and_grad(x)
        l2, g2 = self.l2.value_and_grad(x)
        _check(l1, where, state)
        _check(l2, where, state)
        return _Point(x, l1, l2, g1, g2)

    def restoration_phase(self, state: IRState, start: _Point) -> tuple[_Point, PhaseReport]:
        cfg = self.cfg
        l2x = start.l2
        if l2x == 0.0:
            return start, PhaseReport(0, True, start.l1, start.l2, penalty_phi(start.l1, start.l2, state.theta))
        if start.g2 is None:
            start.l2, start.g2 = self.l2.value_and_grad(start.x)
        adam = _fresh_adam(state, "adam_restoration", cfg)
        z, g2 = start.x, start.g2
        best = None
        used = 0
        ok = False
        truncated = False
        for _ in range(cfg.it_max):
            if state.internal_iters >= cfg.budget:
                truncated = True
                break
            z, adam = adam_step(adam, z, g2, cfg.adam)
            l2z, g2 = self.l2.value_and_grad(z)
            l1z = self.l1.value(z)
            _check(l2z, RESTORATION, state)
            _check(l1z, RESTORATION, state)
            state.internal_iters += 1
            used += 1
            ok = restoration_ok(l2z, l2x, cfg.r)
            self._record(state, RESTORATION, l1z, l2z, state.theta, ok)
            cand = _Point(z, l1z, l2z, None, g2)
            if best is None or l2z < best.l2:
                best = cand
            if ok:
                best = cand
                break
        state.adam_restoration = adam
        if best is None:
            best = start
        return best, PhaseReport(
            used, ok, best.l1, best.l2, penalty_phi(best.l1, best.l2, state.theta), truncated
        )

    def optimization_phase(
        self, state: IRState, x: _Point, y: _Point, theta_next: float
    ) -> tuple[_Point, PhaseReport]:
        cfg = self.cfg
        target = penalty_phi(x.l1, x.l2, theta_next) - cfg.forcing * x.l2
        if cfg.accept_null_step and penalty_phi(y.l1, y.l2, theta_next) <= target:
            return y, PhaseReport(0, True, y.l1, y.l2, penalty_phi(y.l1, y.l2, theta_next))
        if y.g1 is None or y.g2 is None:
            y = self.evaluate(y.x, state, OPTIMIZATION)
        adam = _fresh_adam(state, "adam_optimization", cfg)
        z = y
        best = None
        best_phi = math.inf
        used = 0
        ok = False
        truncated = False
        for _ in range(cfg.it_max):
            if state.internal_iters >= cfg.budget:
                truncated = True
                break
            step, adam = adam_step(adam, z.x, cfg.alpha * z.g1 + cfg.beta * z.g2, cfg.adam)
            z = self.evaluate(step, state, OPTIMIZATION)
            state.internal_iters += 1
            used += 1
            phi = penalty_phi(z.l1, z.l2, theta_next)
            ok = z.l1 <= y.l1 and phi <= target
            self._record(state, OPTIMIZATION, z.l1, z.l2, theta_next, ok)
            if phi < best_phi:
                best, best_phi = z, phi
            if ok:
                best, best_phi = z, phi
                break
        state.adam_optimization = adam
        if best is None:
            best = y
            best_phi = penalty_phi(y.l1, y.l2, theta_next)
        return best, PhaseReport(used, ok, best.l1, best.l2, best_phi, truncated)

    def run(self, x0, theta0: float | None = None) -> IRState:
        cfg = self.cfg
        state = IRState(x=np.array(x0, dtype=np.float64), theta=cfg.theta0 if theta0 is None else theta0)
        if cfg.budget == 0:
            return state
        current = _Point(state.x, _check(self.l1.value(state.x), "start", state), 0.0)
        current.l2, current.g2 = self.l2.value_and_grad(state.x)
        _check(current.l2, "start", state)
        while state.internal_iters < cfg.budget:
            spent = state.internal_iters
            y, rep1 = self.restoration_phase(state, current)
            theta_next = update_theta(current.l1, current.l2, y.l1, y.l2, state.theta, cfg)
            if rep1.truncated:
                # budget ran out inside restoration: stop with its best iterate
                self._finish_epoch(state, current, y, y, theta_next, rep1, None, completed=False)
                break
            z, rep2 = self.optimization_phase(state, current, y, theta_next)
            completed = not rep2.truncated
            self._finish_epoch(state, current, y, z, theta_next, rep1, rep2, completed)
            current = z
            if state.internal_iters == spent:
                log.info("epoch %d made no internal iterations; stopping", state.k)
                break
        return state

    def _finish_epoch(self, state, x, y, z, theta_next, rep1, rep2, completed):
        rec = EpochRecord(
            epoch=state.k,
            theta=state.theta,
            theta_next=theta_next,
            L1_x=x.l1,
            L2_x=x.l2,
            L1_y=y.l1,
            L2_y=y.l2,
            L1_new=z.l1,
            L2_new=z.l2,
            restoration=rep1,
            optimization=rep2,
            completed=completed,
        )
        state.epochs.append(rec)
        state.x = z.x
        state.theta = theta_next
        if completed:
            state.k += 1
        if self.on_epoch is not None:
            self.on_epoch(state, rec)


def train(l1, l2, x0, cfg: IRConfig, on_record=None, on_epoch=None) -> tuple[np.ndarray, IRState]:
    """Run the two-phase method until ``cfg.budget`` internal iterations are spent."""
    state = TwoPhaseTrainer(l1, l2, cfg, on_record, on_epoch).run(x0)
    return state.x, state


def restoration_phase(state: IRState, l1, l2, cfg: IRConfig):
    """Functional wrapper: one restoration phase from ``state.x``; returns ``(y, report)``."""
    trainer = TwoPhaseTrainer(l1, l2, cfg)
    start = _Point(state.x, l1.value(state.x), 0.0)
    start.l2, start.g2 = l2.value_and_grad(state.x)
    y, rep = trainer.restoration_phase(state, start)
    return y.x, rep


def optimization_phase(state: IRState, y, theta_next: float, l1, l2, cfg: IRConfig):
    """Functional wrapper: one optimization phase from ``y`` against ``state.x``."""
    trainer = TwoPhaseTrainer(l1, l2, cfg)
    x = _Point(state.x, l1.value(state.x), l2.value(state.x))
    yp = trainer.evaluate(np.asarray(y, dtype=np.float64), state, OPTIMIZATION)
    z, rep = trainer.optimization_phase(state, x, yp, theta_next)
    return z.x, rep


def with_budget(cfg: IRConfig, budget: int) -> IRConfig:
    return replace(cfg, budget=budget)

