"""Figure rendering for report bundles.

All figures are written straight to files (Agg backend); nothing is
shown interactively.  Each function returns the path it wrote.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def plot_state_comparison(traj_ref, traj_pot, path, title=""):
    """Original-game states (solid) vs potential-game states (dashed)."""
    n = traj_ref.x.shape[1]
    per_axis = 3
    rows = (n + per_axis - 1) // per_axis
    fig, axes = plt.subplots(rows, 1, figsize=(7.5, 2.6 * rows),
                             sharex=True, squeeze=False)
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for r in range(rows):
        ax = axes[r, 0]
        for i in range(r * per_axis, min((r + 1) * per_axis, n)):
            c = colors[i % len(colors)]
            ax.plot(traj_ref.t, traj_ref.x[:, i], color=c, lw=1.4,
                    label=f"x{i + 1} original")
            ax.plot(traj_pot.t, traj_pot.x[:, i], color=c, lw=1.4,
                    ls="--", label=f"x{i + 1} potential")
        ax.grid(True, alpha=0.4)
        ax.legend(fontsize=7, ncol=3)
        ax.set_ylabel("state")
    axes[-1, 0].set_xlabel("t [s]")
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_gradient_comparison(t, grads, path, title=""):
    """Hamiltonian input-gradient signals, original vs potential."""
    channels = [(i, j)
                for i, g in enumerate(grads.g_orig)
                for j in range(g.shape[1])]
    fig, axes = plt.subplots(len(channels), 1,
                             figsize=(7.5, 2.0 * len(channels)),
                             sharex=True, squeeze=False)
    for ax_idx, (i, j) in enumerate(channels):
        ax = axes[ax_idx, 0]
        ax.plot(t, grads.g_orig[i][:, j], lw=1.4,
                label=f"player {i + 1} ch {j + 1} original")
        ax.plot(t, grads.g_pot[i][:, j], lw=1.4, ls="--",
                label=f"player {i + 1} ch {j + 1} potential")
        ax.axhline(0.0, color="k", lw=0.6)
        ax.grid(True, alpha=0.4)
        ax.legend(fontsize=7)
    axes[-1, 0].set_xlabel("t [s]")
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_noise_sweep(snrs_db, medians, path, title=""):
    """Median trajectory error vs SNR for each identification method."""
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    for method, values in medians.items():
        ax.plot(snrs_db, values, marker="o", label=method)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("median trajectory error")
    ax.set_yscale("log")
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
