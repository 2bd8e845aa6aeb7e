"""Matplotlib figure rendering for the rate report.

Backend is forced to Agg so figure export works headless; files land next
to the delimited summary the report writer emits.
"""
from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

RATE_FIGURE = "rates.png"
DIAG_FIGURE = "diagnostics.png"


def _series(entry):
    pts = entry["fit_points"]
    return [p[0] for p in pts], [p[1] for p in pts]


def _plot_stat(ax, entry, label, marker):
    Ts, vals = _series(entry)
    if not Ts:
        return
    ax.loglog(Ts, vals, marker=marker, linestyle="none", label=label)
    slope = entry.get("slope")
    intercept = entry.get("intercept")
    if slope is not None and intercept is not None:
        lo, hi = min(Ts), max(Ts)
        ax.loglog(
            [lo, hi],
            [math.exp(intercept + slope * math.log(lo)),
             math.exp(intercept + slope * math.log(hi))],
            linestyle="--", linewidth=1.0,
            label=f"{label} fit: T^{slope:.3f}",
        )


def save_rate_figures(report: dict, out_dir: str) -> list[str]:
    """Write the regret/estimation and diagnostics figures; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    stats = report["stats"]
    paths = []

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.5))
    _plot_stat(ax1, stats["regret"], "median regret", "o")
    ax1.set_xlabel("T")
    ax1.set_ylabel("median regret")
    ax1.set_title("Regret vs horizon")
    ax1.grid(True, which="both", alpha=0.3)
    ax1.legend(fontsize=8)
    _plot_stat(ax2, stats["est_err_theta"], "theta error", "o")
    _plot_stat(ax2, stats["est_err_K"], "gain error", "s")
    ax2.set_xlabel("T")
    ax2.set_ylabel("median estimation error")
    ax2.set_title("Estimation error vs horizon")
    ax2.grid(True, which="both", alpha=0.3)
    ax2.legend(fontsize=8)
    fig.tight_layout()
    rate_path = os.path.join(out_dir, RATE_FIGURE)
    fig.savefig(rate_path, dpi=150)
    plt.close(fig)
    paths.append(rate_path)

    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    _plot_stat(ax, stats["lam_parallel"], "lam_parallel", "o")
    _plot_stat(ax, stats["lam_perp"], "lam_perp", "s")
    _plot_stat(ax, stats["lam_delta"], "lam_delta", "^")
    _plot_stat(ax, stats["decomp_residual"], "|D_T|", "v")
    ax.set_xlabel("T")
    ax.set_ylabel("median diagnostic value")
    ax.set_title("Gram and decomposition diagnostics")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    diag_path = os.path.join(out_dir, DIAG_FIGURE)
    fig.savefig(diag_path, dpi=150)
    plt.close(fig)
    paths.append(diag_path)

    return paths
