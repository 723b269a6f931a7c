"""End-to-end experiments: Adam baseline and two-phase runs, error reports, artifacts.

Output files (all under ``out_dir``):

``history.csv``
    one row per internal iteration:
    ``internal_iter,epoch,phase,L1,L2,sum,phi,theta,cond_ok``.  Adam rows have
    ``phase=adam`` and empty ``phi``/``theta``/``cond_ok``; for Adam ``L1`` is
    ``MSE_f`` and ``L2`` is ``MSE_u``.
``epochs.csv``
    two-phase runs only, one row per outer iteration with the exact loss values
    used in its acceptance tests.
``errors.csv``
    ``t,rel_l2_error,n_points,excluded_abs_x_below``.
``reference_slices.csv`` / ``predicted_slices.csv``
    ``t,x,value`` on the report grid.
``checkpoint_<epoch>.bin``
    network parameters, see :func:`irpinn.net.save_checkpoint`.
``loss.svg`` / ``slices.svg``
    optional figures.

Floats are written with ``repr`` so every value round-trips exactly.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .adam import AdamConfig, AdamState, adam_step, save_adam_state
from .net import MLPConfig, NumericalError, forward, init_params, save_checkpoint
from .problems import ProblemSpec, get_problem, write_txv_csv
from .two_phase import EpochRecord, HistoryRecord, IRConfig, TwoPhaseTrainer

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ["internal_iter", "epoch", "phase", "L1", "L2", "sum", "phi", "theta", "cond_ok"]
EPOCH_COLUMNS = [
    "epoch", "theta", "theta_next", "L1_x", "L2_x", "L1_y", "L2_y", "L1_new", "L2_new",
    "restoration_iters", "restoration_ok", "optimization_iters", "optimization_ok", "completed",
]
ERROR_COLUMNS = ["t", "rel_l2_error", "n_points", "excluded_abs_x_below"]
COMPARE_COLUMNS = ["method", "slice", "rel_l2_error", "oscillation_count"]

REPORT_GRID = 256
SHOCK_HALF_WIDTH = 0.05
SHOCK_TIME = 0.75

METHODS = ("adam", "two-phase")
ROLES = ("f-u", "u-f")


class ExperimentError(ValueError):
    """Invalid experiment configuration."""


class UndefinedMetricError(ValueError):
    """Relative error requested against an all-zero reference."""


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "heat"
    method: str = "adam"
    # "f-u": L1 = MSE_f, L2 = MSE_u; "u-f" swaps them
    roles: str = "f-u"
    hidden_layers: int = 4
    width: int = 20
    normalize_inputs: bool = True
    n_collocation: int = 1000
    n_data: int = 100
    seed: int = 0
    point_seed: int = 0
    budget: int = 1000
    learning_rate: float = 0.0005
    r: float = 0.99
    theta0: float = 0.8
    it_max: int = 100
    alpha: float | None = None
    beta: float | None = None
    decrement_variant: str = "paper"
    theta_min: float = 1e-8
    reset_adam_per_phase: bool = False
    accept_null_step: bool = False
    checkpoint_every: int = 0
    plots: bool = False
    out_dir: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.problem not in ("burgers", "heat"):
            raise ExperimentError(f"unknown problem {self.problem!r}")
        if self.method not in METHODS:
            raise ExperimentError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.roles not in ROLES:
            raise ExperimentError(f"roles must be one of {ROLES}, got {self.roles!r}")
        if self.hidden_layers < 1 or self.width < 1:
            raise ExperimentError("network needs at least one hidden layer of positive width")
        if self.n_collocation < 1 or self.n_data < 3:
            raise ExperimentError("need >= 1 collocation point and >= 3 data points")
        if self.budget < 0 or self.checkpoint_every < 0:
            raise ExperimentError("budget and checkpoint_every must be >= 0")
        if self.method == "two-phase" and (self.alpha is None or self.beta is None):
            raise ExperimentError("two-phase runs need alpha and beta")
        try:
            self.adam_config()
            if self.method == "two-phase":
                self.ir_config()
        except ValueError as exc:
            raise ExperimentError(str(exc)) from exc
        return self

    def mlp_config(self, problem: ProblemSpec | None = None) -> MLPConfig:
        problem = problem or get_problem(self.problem)
        kw = {}
        if self.normalize_inputs:
            kw = dict(input_lower=problem.domain.lower, input_upper=problem.domain.upper)
        return MLPConfig.hidden(self.hidden_layers, self.width, **kw)

    def adam_config(self) -> AdamConfig:
        return AdamConfig(learning_rate=self.learning_rate)

    def ir_config(self) -> IRConfig:
        return IRConfig(
            r=self.r,
            theta0=self.theta0,
            it_max=self.it_max,
            alpha=self.alpha,
            beta=self.beta,
            budget=self.budget,
            decrement_variant=self.decrement_variant,
            theta_min=self.theta_min,
            adam=self.adam_config(),
            reset_adam_per_phase=self.reset_adam_per_phase,
            accept_null_step=self.accept_null_step,
        )


@dataclass
class SliceError:
    t: float
    rel_l2_error: float
    n_points: int
    excluded_abs_x_below: float


@dataclass
class ErrorReport:
    slices: list[SliceError]

    def as_dict(self) -> dict[float, float]:
        return {s.t: s.rel_l2_error for s in self.slices}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    params: np.ndarray
    history: list[HistoryRecord]
    errors: ErrorReport
    epochs: list[EpochRecord] = field(default_factory=list)
    n_epochs: int = 0
    theta: float = math.nan

    @property
    def internal_iterations(self) -> int:
        return len(self.history)

    def final_losses(self) -> tuple[float, float]:
        if not self.history:
            return math.nan, math.nan
        return self.history[-1].L1, self.history[-1].L2


def rel_l2_error(predicted, reference) -> float:
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if predicted.shape != reference.shape or reference.size == 0:
        raise ValueError("predicted and reference must be equal-length and non-empty")
    denom = np.linalg.norm(reference)
    if denom == 0.0:
        raise UndefinedMetricError("reference is identically zero")
    return float(np.linalg.norm(predicted - reference) / denom)


def oscillation_count(values, rel_tol: float = 1e-12) -> int:
    """Number of steps where the next value exceeds the current one by more than ``rel_tol`` relative."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0
    return int(np.sum(v[1:] > v[:-1] + rel_tol * np.abs(v[:-1])))


def history_oscillations(history: list[HistoryRecord], column: str = "sum") -> int:
    return oscillation_count([getattr(rec, column) for rec in history])


def accepted_phi_oscillations(epochs: list[EpochRecord], rel_tol: float = 1e-12) -> int:
    """Merit increases across outer iterations whose optimization phase met its tests.

    Each accepted step is compared at the penalty parameter it was accepted
    with: ``Phi(x_k, theta_{k+1})`` against ``Phi(x_{k+1}, theta_{k+1})``.
    """
    count = 0
    for e in epochs:
        if e.optimization is not None and e.optimization.condition_satisfied:
            count += oscillation_count([e.phi_x_next, e.phi_new], rel_tol)
    return count


def report_grid(problem: ProblemSpec) -> np.ndarray:
    return np.linspace(problem.domain.x_min, problem.domain.x_max, REPORT_GRID)


def _slice_mask(problem: ProblemSpec, t: float, xs: np.ndarray) -> tuple[np.ndarray, float]:
    if problem.name == "burgers" and t == SHOCK_TIME:
        return np.abs(xs) >= SHOCK_HALF_WIDTH, SHOCK_HALF_WIDTH
    return np.ones_like(xs, dtype=bool), 0.0


def error_report(problem: ProblemSpec, predict: Callable, times=None) -> ErrorReport:
    """Relative L2 error of ``predict(t, x)`` against the reference on each report slice."""
    xs = report_grid(problem)
    slices = []
    for t in times or problem.report_times:
        ts = np.full_like(xs, t)
        mask, excl = _slice_mask(problem, t, xs)
        err = rel_l2_error(np.asarray(predict(ts, xs))[mask], problem.reference(ts, xs)[mask])
        slices.append(SliceError(float(t), err, int(mask.sum()), excl))
    return ErrorReport(slices)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    if value is None:
        return ""
    return str(value)


class _CsvStream:
    def __init__(self, path, columns):
        self.fh = open(path, "w", newline="") if path else None
        self.writer = csv.writer(self.fh) if self.fh else None
        if self.writer:
            self.writer.writerow(columns)

    def write(self, values):
        if self.writer:
            self.writer.writerow([_fmt(v) for v in values])

    def close(self):
        if self.fh:
            self.fh.close()


def _history_values(rec: HistoryRecord):
    cond = None if rec.phase == "adam" else rec.cond_ok
    return [rec.internal_iter, rec.epoch, rec.phase, rec.L1, rec.L2, rec.sum, rec.phi, rec.theta, cond]


def _epoch_values(e: EpochRecord):
    opt = e.optimization
    return [
        e.epoch, e.theta, e.theta_next, e.L1_x, e.L2_x, e.L1_y, e.L2_y, e.L1_new, e.L2_new,
        e.restoration.iterations_used, e.restoration.condition_satisfied,
        opt.iterations_used if opt else 0, opt.condition_satisfied if opt else False,
        e.completed,
    ]


def _losses(problem, mlp, points, roles):
    mse_u, mse_f = problem.losses(mlp, points)
    return (mse_f, mse_u) if roles == "f-u" else (mse_u, mse_f)


def _out(cfg, name):
    return os.path.join(cfg.out_dir, name) if cfg.out_dir else None


def _run_adam(cfg, mlp, l1, l2, x0, history_out):
    adam = cfg.adam_config()
    history: list[HistoryRecord] = []
    p = x0.copy()
    state = AdamState.zeros(p.size)
    if cfg.budget == 0:
        return p, history, state
    _, g1 = l1.value_and_grad(p)
    _, g2 = l2.value_and_grad(p)
    for i in range(1, cfg.budget + 1):
        p, state = adam_step(state, p, g1 + g2, adam)
        v1, g1 = l1.value_and_grad(p)
        v2, g2 = l2.value_and_grad(p)
        if not (math.isfinite(v1) and math.isfinite(v2)):
            raise NumericalError(f"non-finite loss at Adam epoch {i} (L1={v1!r}, L2={v2!r})")
        rec = HistoryRecord(i, i, "adam", v1, v2, v1 + v2, math.nan, math.nan, True)
        history.append(rec)
        history_out.write(_history_values(rec))
        if cfg.out_dir and cfg.checkpoint_every and i % cfg.checkpoint_every == 0:
            save_checkpoint(_out(cfg, f"checkpoint_{i}.bin"), mlp, p)
            save_adam_state(_out(cfg, f"adam_{i}.bin"), state)
    return p, history, state


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Train per ``cfg``, evaluate on the report slices and write artifacts to ``cfg.out_dir``."""
    cfg.validate()
    problem = get_problem(cfg.problem)
    mlp = cfg.mlp_config(problem)
    points = problem.points(cfg.n_collocation, cfg.n_data, cfg.point_seed)
    l1, l2 = _losses(problem, mlp, points, cfg.roles)
    x0 = init_params(mlp, cfg.seed)
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
    history_out = _CsvStream(_out(cfg, "history.csv"), HISTORY_COLUMNS)
    epochs_out = None
    epochs: list[EpochRecord] = []
    n_epochs, theta = 0, math.nan
    try:
        if cfg.method == "adam":
            params, history, _ = _run_adam(cfg, mlp, l1, l2, x0, history_out)
            n_epochs = len(history)
            final_tag = n_epochs
        else:
            epochs_out = _CsvStream(_out(cfg, "epochs.csv"), EPOCH_COLUMNS)

            def on_epoch(state, rec):
                epochs_out.write(_epoch_values(rec))
                if cfg.out_dir and cfg.checkpoint_every and rec.completed and state.k % cfg.checkpoint_every == 0:
                    save_checkpoint(_out(cfg, f"checkpoint_{state.k}.bin"), mlp, state.x)
                    for name in ("restoration", "optimization"):
                        st = getattr(state, f"adam_{name}")
                        if st is not None:
                            save_adam_state(_out(cfg, f"adam_{name}_{state.k}.bin"), st)

            trainer = TwoPhaseTrainer(
                l1, l2, cfg.ir_config(),
                on_record=lambda rec: history_out.write(_history_values(rec)),
                on_epoch=on_epoch,
            )
            state = trainer.run(x0)
            params, history, epochs = state.x, state.history, state.epochs
            n_epochs, theta = state.k, state.theta
            final_tag = state.k
    finally:
        history_out.close()
        if epochs_out is not None:
            epochs_out.close()

    errors = error_report(problem, lambda t, x: forward(params, mlp, t, x))
    result = ExperimentResult(cfg, params, history, errors, epochs, n_epochs, theta)
    if cfg.out_dir:
        save_checkpoint(_out(cfg, f"checkpoint_{final_tag}.bin"), mlp, params)
        write_error_artifacts(cfg.out_dir, problem, errors, lambda t, x: forward(params, mlp, t, x))
        if cfg.plots:
            from . import plots

            plots.loss_figure(history, _out(cfg, "loss.svg"), title=f"{cfg.problem} / {cfg.method}")
            plots.slices_figure(problem, lambda t, x: forward(params, mlp, t, x), _out(cfg, "slices.svg"))
    return result


def write_errors_csv(path, errors: ErrorReport) -> None:
    out = _CsvStream(path, ERROR_COLUMNS)
    for s in errors.slices:
        out.write([s.t, s.rel_l2_error, s.n_points, s.excluded_abs_x_below])
    out.close()


def write_error_artifacts(out_dir, problem: ProblemSpec, errors: ErrorReport, predict) -> None:
    write_errors_csv(os.path.join(out_dir, "errors.csv"), errors)
    xs = report_grid(problem)
    ref_rows, pred_rows = [], []
    for s in errors.slices:
        ts = np.full_like(xs, s.t)
        ref_rows.append(np.column_stack([ts, xs, problem.reference(ts, xs)]))
        pred_rows.append(np.column_stack([ts, xs, predict(ts, xs)]))
    write_txv_csv(os.path.join(out_dir, "reference_slices.csv"), np.vstack(ref_rows))
    write_txv_csv(os.path.join(out_dir, "predicted_slices.csv"), np.vstack(pred_rows))


def stability_count(result: ExperimentResult) -> int:
    """Adam: increases of ``L1+L2`` per epoch.  Two-phase: merit increases at accepted iterates."""
    if result.config.method == "adam":
        return history_oscillations(result.history, "sum")
    return accepted_phi_oscillations(result.epochs)


def compare(entries: list[tuple[str, ExperimentConfig]], budget: int, out_path=None) -> list[list]:
    """Run every ``(label, config)`` at the same internal-iteration budget.

    Returns rows ``[label, slice_t, rel_l2_error, oscillation_count]`` and, when
    ``out_path`` is given, writes them as CSV with :data:`COMPARE_COLUMNS`.
    """
    rows = []
    for label, cfg in entries:
        res = run_experiment(replace(cfg, budget=budget, out_dir=None, plots=False))
        osc = stability_count(res)
        for s in res.errors.slices:
            rows.append([label, s.t, s.rel_l2_error, osc])
    if out_path:
        out = _CsvStream(out_path, COMPARE_COLUMNS)
        for row in rows:
            out.write(row)
        out.close()
    return rows


def config_fields() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
