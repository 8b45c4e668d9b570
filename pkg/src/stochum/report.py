"""Static PNG renderers for experiment artifacts.

Each function draws one figure and writes it next to the delimited output
of the same experiment.  Rendering is strictly a post-processing step: the
inputs are plain arrays/records already persisted elsewhere, everything
runs on the Agg backend, and the PNG metadata is pinned so that identical
inputs produce identical bytes (run-to-run reproducibility includes the
figures).
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_weight_figure",
    "save_history_figure",
    "save_state_figure",
    "save_fixed_point_figure",
    "save_audit_figure",
    "save_sweep_figure",
]

_METADATA = {"Software": "stochum"}
_FLOOR = 1e-300  # keeps log scales defined when a value underflows to zero


def _save(fig, path) -> None:
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)


def _positive(values) -> np.ndarray:
    return np.maximum(np.asarray(values, dtype=float), _FLOOR)


def save_weight_figure(path, fields) -> None:
    """Heatmaps of phi, xi and the normalized exponent ell - kappa."""
    panels = (
        ("phi", fields.phi),
        ("xi", fields.xi),
        ("ell - kappa", fields.ell - fields.norm_offset),
    )
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.4), constrained_layout=True)
    extent = (
        float(fields.x[0]),
        float(fields.x[-1]),
        float(fields.time_nodes[0]),
        float(fields.time_nodes[-1]),
    )
    for ax, (title, table) in zip(axes, panels):
        im = ax.imshow(table, origin="lower", aspect="auto", extent=extent)
        ax.set_title(title)
        ax.set_xlabel("x")
        ax.set_ylabel("t")
        fig.colorbar(im, ax=ax)
    _save(fig, path)


def save_history_figure(path, cost_history, residual_history) -> None:
    """Cost and preconditioned-residual decay of one variational solve."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4), constrained_layout=True)
    ax1.semilogy(_positive(cost_history), marker=".")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("cost")
    ax1.set_title("cost history")
    ax2.semilogy(_positive(residual_history), marker=".")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("residual norm")
    ax2.set_title("gradient residual")
    _save(fig, path)


def save_state_figure(path, times, x, mean_state) -> None:
    """Heatmap of the node-averaged state E[y](t, x) on the tree levels."""
    fig, ax = plt.subplots(figsize=(6.0, 3.8), constrained_layout=True)
    tt = np.asarray(times, dtype=float)
    xx = np.asarray(x, dtype=float)
    im = ax.pcolormesh(xx, tt, np.asarray(mean_state, dtype=float), shading="nearest")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title("expected state")
    fig.colorbar(im, ax=ax)
    _save(fig, path)


def save_fixed_point_figure(path, deltas, ratios) -> None:
    """Source-update decay and contraction ratios of a fixed-point run."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.4), constrained_layout=True)
    steps = np.arange(1, len(deltas) + 1)
    ax1.semilogy(steps, _positive(deltas), marker="o")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("source-update norm")
    ax1.set_title("fixed-point increments")
    if len(ratios):
        ax2.plot(np.arange(2, len(ratios) + 2), ratios, marker="o")
    ax2.axhline(1.0, color="k", linewidth=0.8, linestyle="--")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("ratio")
    ax2.set_title("contraction ratios")
    _save(fig, path)


def save_audit_figure(path, reports) -> None:
    """Per-sample inequality ratios, one panel per audited inequality."""
    names = list(reports)
    fig, axes = plt.subplots(
        1, len(names), figsize=(3.6 * len(names), 3.4), constrained_layout=True
    )
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        rep = reports[name]
        samples = np.arange(rep.samples)
        finite = [r if math.isfinite(r) else np.nan for r in rep.ratios]
        ax.semilogy(samples, _positive(finite), linestyle="none", marker="o")
        if math.isfinite(rep.median_ratio):
            ax.axhline(rep.median_ratio, color="k", linewidth=0.8, linestyle="--")
        ax.set_title(name)
        ax.set_xlabel("sample")
        ax.set_ylabel("LHS / RHS")
    _save(fig, path)


def save_sweep_figure(path, eps_values, terminal_norms, slope, intercept) -> None:
    """Terminal norm against the penalty parameter with the fitted power law."""
    fig, ax = plt.subplots(figsize=(5.2, 3.8), constrained_layout=True)
    eps = np.asarray(eps_values, dtype=float)
    ax.loglog(eps, _positive(terminal_norms), linestyle="none", marker="o", label="observed")
    fit = np.exp(intercept) * eps**slope
    ax.loglog(eps, _positive(fit), label=f"slope {slope:.3f}")
    ax.set_xlabel("eps")
    ax.set_ylabel("terminal squared norm")
    ax.legend()
    _save(fig, path)
