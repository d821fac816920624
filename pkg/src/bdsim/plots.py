"""Figure renderers for the report path (PNG files next to the tables)."""

from __future__ import annotations

import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def psi_figure(spectral, path) -> None:
    """Eigenfunction profile plus its log-scale tail with the fitted slope."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    x = spectral.grid.nodes
    ax1.plot(x, spectral.psi, lw=1.0)
    ax1.set_xlabel("x" if spectral.grid.geometry == "full_line" else "r")
    ax1.set_ylabel("psi")
    ax1.set_title(f"lambda0 = {spectral.lambda0:.6g}")
    pos = spectral.psi > 0
    ax2.semilogy(x[pos], spectral.psi[pos], lw=1.0)
    kappa = -spectral.tail_slope
    ref = spectral.psi[pos][len(x[pos]) // 2]
    xm = x[pos][len(x[pos]) // 2]
    ax2.semilogy(x[pos], ref * np.exp(-kappa * (x[pos] - xm)), "k--", lw=0.8,
                 label=f"slope -{kappa:.4g}")
    ax2.legend()
    ax2.set_title("tail decay")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def growth_figure(stats, rate, path) -> None:
    """log mean particle count against time with the predicted slope."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    full = ~np.isnan(stats.N).any(axis=0)
    t = stats.obs_times[full]
    m = stats.N[:, full].mean(axis=0)
    ax.semilogy(t, m, "o-", ms=3, label="mean N_t")
    if rate is not None and len(t):
        ax.semilogy(t, m[0] * np.exp(rate * (t - t[0])), "k--", lw=0.8,
                    label=f"slope {rate:.4g}")
    ax.set_xlabel("t")
    ax.set_ylabel("mean particle count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def front_figure(stats, b, path, delta_frac: float = 0.15) -> None:
    """Histogram of R_t/t at each replica's last observation."""
    speeds = []
    for i in range(stats.replicas):
        js = np.nonzero(~np.isnan(stats.rmax[i]))[0]
        if len(js):
            j = js[-1]
            speeds.append(stats.rmax[i, j] / stats.obs_times[j])
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ax.hist(speeds, bins=40, color="steelblue", alpha=0.8)
    for v, st in ((b, "-"), (b * (1 - delta_frac), "--"),
                  (b * (1 + delta_frac), "--")):
        ax.axvline(v, color="k", ls=st, lw=0.9)
    ax.set_xlabel("R_t / t")
    ax.set_ylabel("replicas")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def martingale_figure(stats, lambda0, path) -> None:
    """Discounted psi-sum trajectories: flat mean is the martingale check."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    full = ~np.isnan(stats.N).any(axis=0)
    t = stats.obs_times[full]
    disc = stats.psi_sum[:, full] * np.exp(-lambda0 * t)[None, :]
    m = disc.mean(axis=0)
    se = disc.std(ddof=1, axis=0) / math.sqrt(stats.replicas)
    ax.errorbar(t, m, yerr=3 * se, fmt="o-", ms=3, capsize=2)
    ax.set_xlabel("t")
    ax.set_ylabel("mean e^{-l0 t} sum psi(X_i)")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def extinction_figure(tables, path) -> None:
    """M^1 profiles for each solved variant."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for tab in tables:
        ax.plot(tab.grid.nodes, tab.M[0], lw=1.0, label=tab.variant)
    ax.axhline(1.0, color="k", lw=0.6, ls=":")
    ax.set_xlabel("r")
    ax.set_ylabel("M1(r)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
