"""Static figures for finished runs (loss histories and solution slices)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# deterministic SVG output: no random ids, no timestamp
plt.rcParams["svg.hashsalt"] = "irpinn"
plt.rcParams["font.size"] = 9
plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def loss_figure(history, path, title=None):
    """Semilog plot of L1, L2 and L1+L2 against internal iteration."""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    if history:
        it = np.array([h.internal_iter for h in history])
        for name, style in (("L1", "-"), ("L2", "-"), ("sum", "--")):
            label = "L1+L2" if name == "sum" else name
            ax.semilogy(it, [getattr(h, name) for h in history], style, lw=0.8, label=label)
        ax.legend(frameon=False)
    ax.set_xlabel("internal iteration")
    ax.set_ylabel("loss")
    if title:
        ax.set_title(title)
    _save(fig, path)


def slices_figure(problem, predict, path, times=None, n=256):
    times = times or problem.report_times
    xs = np.linspace(problem.domain.x_min, problem.domain.x_max, n)
    fig, axes = plt.subplots(1, len(times), figsize=(3.0 * len(times), 2.8), sharey=True)
    for ax, t in zip(np.atleast_1d(axes), times):
        ts = np.full_like(xs, t)
        ax.plot(xs, problem.reference(ts, xs), "b-", lw=2, label="reference")
        ax.plot(xs, predict(ts, xs), "r--", lw=1.5, label="network")
        ax.set_title(f"t = {t:g}")
        ax.set_xlabel("x")
    np.atleast_1d(axes)[0].set_ylabel("u(t, x)")
    np.atleast_1d(axes)[0].legend(frameon=False)
    _save(fig, path)


def field_figure(problem, predict, path, nt=101, nx=256):
    """Colour map of the predicted solution over the whole domain."""
    d = problem.domain
    T, X = np.meshgrid(np.linspace(d.t_min, d.t_max, nt), np.linspace(d.x_min, d.x_max, nx))
    U = np.asarray(predict(T.ravel(), X.ravel())).reshape(T.shape)
    fig, ax = plt.subplots(figsize=(5.0, 3.0))
    mesh = ax.pcolormesh(T, X, U, shading="auto", cmap="rainbow")
    fig.colorbar(mesh, ax=ax, label="u")
    ax.set_xlabel("t")
    ax.set_ylabel("x")
    ax.grid(False)
    _save(fig, path)
