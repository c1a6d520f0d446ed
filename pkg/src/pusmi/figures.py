"""Rendering of experiment artifacts to image files.

Every function takes already-computed results plus an output path, draws
one figure with the non-interactive backend, writes it, and returns the
path; nothing here recomputes statistics or opens windows.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .experiments import PurlToyResult
from .puit import PermTestResult
from .purl import PurlResult

__all__ = [
    "mse_figure",
    "toy_figure",
    "type2_figure",
    "permutation_figure",
    "history_figure",
]


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def mse_figure(rows, path, axis_label: str = "sample size") -> Path:
    """Log-log curve of mean squared error with standard-error bars.

    ``rows`` are ``(n, mse_mean, mse_stderr)`` as produced by the
    estimation-error sweeps.
    """
    rows = sorted(rows)
    n = np.array([r[0] for r in rows], dtype=float)
    mean = np.array([r[1] for r in rows], dtype=float)
    err = np.array([r[2] for r in rows], dtype=float)

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.errorbar(n, mean, yerr=err, fmt="o-", capsize=3)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(axis_label)
    ax.set_ylabel("squared estimation error")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def toy_figure(toy: PurlToyResult, path) -> Path:
    """Labeled evaluation sample with the learned and PCA directions.

    Direction lines pass through the sample mean; the learned one should
    hug the class-separating (horizontal) axis and the principal one the
    high-variance (vertical) axis.
    """
    x = toy.eval_data.features
    pos = x[toy.eval_data.labels > 0]
    neg = x[toy.eval_data.labels < 0]
    center = x.mean(axis=0)
    span = 1.1 * float(np.abs(x - center).max())

    fig, ax = plt.subplots(figsize=(4.6, 4.6))
    ax.scatter(pos[:, 0], pos[:, 1], s=12, alpha=0.6, label="positive")
    ax.scatter(neg[:, 0], neg[:, 1], s=12, alpha=0.6, label="negative")
    for direction, name, style in (
        (toy.purl_direction, "learned map", "-"),
        (toy.pca_direction, "first principal axis", "--"),
    ):
        ends = np.outer([-span, span], direction) + center
        ax.plot(ends[:, 0], ends[:, 1], style, color="black", linewidth=1.5, label=name)
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.set_aspect("equal")
    ax.legend(fontsize=8)
    return _save(fig, path)


def type2_figure(rows, path) -> Path:
    """Missed-detection frequency against the positive count, one curve
    per unlabeled count.

    ``rows`` follow the type-II table layout
    ``(n_p, n_u, level, trials, type2_freq)``.
    """
    rows = sorted(rows, key=lambda r: (r[1], r[0]))
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for n_u in sorted({r[1] for r in rows}):
        group = [r for r in rows if r[1] == n_u]
        ax.plot(
            [r[0] for r in group],
            [r[4] for r in group],
            "o-",
            label=f"$n_U$ = {n_u}",
        )
    ax.set_xlabel("number of positive samples")
    ax.set_ylabel("type-II error frequency")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def permutation_figure(result: PermTestResult, path) -> Path:
    """Histogram of the permutation null with the observed value marked."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.hist(result.permuted, bins=30, alpha=0.75, label="permuted")
    ax.axvline(result.observed, color="black", linewidth=1.5, label="observed")
    ax.set_xlabel("mutual-information statistic")
    ax.set_ylabel("count")
    ax.set_title(f"p = {result.p_value:.4g}  (B = {result.b_count})", fontsize=10)
    ax.legend(fontsize=8)
    return _save(fig, path)


def history_figure(result: PurlResult, path) -> Path:
    """Training (and validation, when tracked) objective per epoch."""
    history = np.asarray(result.history, dtype=float)
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    if history.size:
        epochs = np.arange(1, history.shape[0] + 1)
        ax.plot(epochs, history[:, 0], label="train")
        if np.isfinite(history[:, 1]).any():
            ax.plot(epochs, history[:, 1], label="validation")
        ax.axvline(
            result.best_iteration + 1,
            color="black",
            linewidth=1.0,
            linestyle="--",
            label="best iteration",
        )
    ax.set_xlabel("epoch")
    ax.set_ylabel("training objective")
    ax.legend(fontsize=8)
    return _save(fig, path)
