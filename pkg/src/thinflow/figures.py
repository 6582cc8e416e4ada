"""Matplotlib renderings written alongside the CSV reports (headless Agg)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def diagnostics_figure(rows, path):
    """Time series of the scalar diagnostics from a run."""
    t = [r["t"] for r in rows]
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    for ax, key in zip(axes.flat, ("enstrophy", "palinstrophy", "max_omega", "tail_fraction")):
        ax.plot(t, [r[key] for r in rows])
        ax.set_title(key)
        ax.grid(True, alpha=0.3)
        if key == "tail_fraction":
            ax.set_yscale("log")
    for ax in axes[1]:
        ax.set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def origin_figure(origin, path):
    """Velocity-gradient entries and the deformation diagonal at the origin."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    t = origin["t"]
    ax1.plot(t, origin["du11"], label="du11")
    ax1.plot(t, origin["du22"], label="du22")
    ax1.set_xlabel("t")
    ax1.set_title("grad u at the origin")
    ax1.legend()
    ax1.grid(True, alpha=0.3)
    ax2.plot(t, origin["deta11"], label="D11")
    ax2.plot(t, origin["deta22"], label="D22")
    ax2.plot(t, origin["det"], "--", label="det", color="gray")
    ax2.set_xlabel("t")
    ax2.set_title("origin deformation")
    ax2.legend()
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def key_integral_figure(times, total_I, per_key, path):
    """Total key integral and per-component contributions over time."""
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.plot(times, total_I, "k-", lw=2, label="I")
    for key, series in per_key.items():
        ax.plot(times, series, label=f"I[{key}]")
    ax.set_xlabel("t")
    ax.set_ylabel("key integral")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def scaling_figure(records, fit, path):
    """log-log dissipation vs viscosity with the fitted power law."""
    nus = np.array([r.nu for r in records], dtype=float)
    chis = np.array([r.chi for r in records], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(nus, chis, "o", label="measured")
    xs = np.array([nus.min(), nus.max()])
    ax.loglog(xs, np.exp(fit.intercept) * xs**fit.slope, "-",
              label=f"slope {fit.slope:.3f} "
                    f"[{fit.slope_ci[0]:.3f}, {fit.slope_ci[1]:.3f}]")
    ax.loglog(xs, chis.mean() * np.ones(2), ":", color="gray", label="flat")
    ax.set_xlabel("nu")
    ax.set_ylabel("chi")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
