"""Figure rendering for experiment reports.

The harness itself emits data only; these helpers turn its summaries into
PNG figures written next to the delimited output. All rendering uses the
Agg backend so the CLI works headless.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_quantile_summary", "plot_rate_fit", "plot_lemma_sweep"]


def plot_quantile_summary(summary, path) -> None:
    """Histogram of the trial statistic with the quantile and bound marked."""
    finite = [v for v in summary.values if math.isfinite(v)]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if finite:
        ax.hist(finite, bins=30, color="#4878a8", alpha=0.8)
    n_inf = len(summary.values) - len(finite)
    ax.axvline(summary.quantile_value, color="#c44e52", linestyle="-",
               label=f"{summary.level:g}-quantile")
    ax.axvline(summary.bound, color="#333333", linestyle="--", label="bound")
    ax.set_xlabel(summary.statistic_name)
    ax.set_ylabel("trials")
    title = f"{len(summary.values)} trials"
    if n_inf:
        title += f" ({n_inf} diverged, off scale)"
    if summary.containment_fraction is not None:
        title += f", containment {summary.containment_fraction:.2f}"
    ax.set_title(title, fontsize=10)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_rate_fit(fit, path) -> None:
    """Log-log quantiles vs K with raw and floored fits."""
    ks = np.asarray(fit.K_values, dtype=np.float64)
    qs = np.asarray(fit.quantiles, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.loglog(ks, qs, "o", color="#4878a8", label="quantile")
    grid = np.geomspace(ks[0], ks[-1], 50)
    ax.loglog(grid, np.exp(fit.raw_intercept) * grid ** fit.raw_slope,
              "--", color="#888888",
              label=f"raw slope {fit.raw_slope:.2f}")
    if math.isfinite(fit.slope):
        ax.loglog(grid, fit.floor + np.exp(fit.intercept) * grid ** fit.slope,
                  "-", color="#c44e52",
                  label=f"floored slope {fit.slope:.2f}")
        ax.axhline(fit.floor, color="#c44e52", linestyle=":", linewidth=0.8)
    ax.set_xlabel("K")
    ax.set_ylabel("quantile")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_lemma_sweep(rows, path) -> None:
    """Empirical clipped-moment values against their closed-form bounds."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    for ax, emp_key, bound_key, name in (
            (axes[0], "emp_bias", "bound_bias", "bias"),
            (axes[1], "emp_var", "bound_var", "variance")):
        emp = np.array([r[emp_key] for r in rows])
        bound = np.array([r[bound_key] for r in rows])
        ok = np.array([r["pass"] for r in rows])
        # zero empirical values cannot sit on a log axis; floor them
        emp = np.maximum(emp, 1e-300)
        ax.loglog(bound[ok], emp[ok], "o", color="#4878a8", ms=4, label="pass")
        if (~ok).any():
            ax.loglog(bound[~ok], emp[~ok], "x", color="#c44e52", ms=6,
                      label="fail")
        lims = [min(bound.min(), emp.min()), max(bound.max(), emp.max())]
        ax.loglog(lims, lims, "--", color="#888888", linewidth=0.8)
        ax.set_xlabel(f"{name} bound")
        ax.set_ylabel(f"empirical {name}")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
