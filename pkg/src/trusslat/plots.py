"""Matplotlib figure writers for the CLI report paths.

Every helper renders straight to a file with the Agg backend; nothing here
opens a window.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_training_history(history, path) -> None:
    epochs = [h.epoch for h in history]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7), sharex=True)
    axes[0, 0].plot(epochs, [h.total for h in history], label="train")
    axes[0, 0].plot(epochs, [h.val_total for h in history], label="validation")
    axes[0, 0].set_ylabel("total loss")
    axes[0, 0].set_yscale("log")
    axes[0, 0].legend()
    axes[0, 1].plot(epochs, [h.recon_a for h in history], label="adjacency")
    axes[0, 1].plot(epochs, [h.recon_x for h in history], label="offsets")
    axes[0, 1].set_ylabel("reconstruction MSE")
    axes[0, 1].set_yscale("log")
    axes[0, 1].legend()
    axes[1, 0].plot(epochs, [h.prop for h in history])
    axes[1, 0].set_ylabel("property MSE")
    axes[1, 0].set_yscale("log")
    axes[1, 0].set_xlabel("epoch")
    axes[1, 1].plot(epochs, [h.kld for h in history], label="KLD")
    ax2 = axes[1, 1].twinx()
    ax2.plot(epochs, [h.beta for h in history], color="tab:red", alpha=0.6, label="beta")
    ax2.set_ylabel("beta", color="tab:red")
    axes[1, 1].set_ylabel("KLD")
    axes[1, 1].set_xlabel("epoch")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_elastic_surface(record, path, n_theta: int = 49, n_phi: int = 96) -> None:
    """3D surface of the directional Young's modulus E(d)."""
    thetas = np.linspace(0.0, np.pi, n_theta)
    phis = np.linspace(0.0, 2.0 * np.pi, n_phi)
    tg, pg = np.meshgrid(thetas, phis, indexing="ij")
    dirs = np.column_stack(
        [
            (np.sin(tg) * np.cos(pg)).ravel(),
            (np.sin(tg) * np.sin(pg)).ravel(),
            np.cos(tg).ravel(),
        ]
    )
    from .elastic import directional_moduli

    e = directional_moduli(record, dirs).reshape(tg.shape)
    x = e * np.sin(tg) * np.cos(pg)
    y = e * np.sin(tg) * np.sin(pg)
    z = e * np.cos(tg)
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    norm = plt.Normalize(e.min(), e.max())
    ax.plot_surface(x, y, z, facecolors=plt.cm.viridis(norm(e)), rstride=1, cstride=1,
                    linewidth=0, antialiased=True)
    ax.set_xlabel("$E_1$")
    ax.set_ylabel("$E_2$")
    ax.set_zlabel("$E_3$")
    ax.set_title("directional Young's modulus")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_optimization_trajectories(run, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 5))
    best = None
    for traj in run.trajectories:
        vals = traj.objective_path
        shown = np.where(np.abs(vals) < 1e5, vals, np.nan)
        ax.plot(shown, color="tab:gray", alpha=0.25, linewidth=0.8)
        if traj.best_graph is not None and (
            best is None or traj.best_objective < best.best_objective
        ):
            best = traj
    if best is not None:
        shown = np.where(np.abs(best.objective_path) < 1e5, best.objective_path, np.nan)
        ax.plot(shown, color="tab:red", linewidth=1.8, label="best seed")
        ax.legend()
    ax.set_xlabel("optimization step")
    ax.set_ylabel(f"objective ({run.objective.kind}, minimized)")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_path_profile(values_per_step: np.ndarray, labels, path, xlabel: str) -> None:
    """Per-step property traces for traversals and interpolations."""
    values = np.asarray(values_per_step, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 5))
    for col, label in enumerate(labels):
        ax.plot(values[:, col], label=label, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("predicted property")
    ax.legend(fontsize=7, ncol=3)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def save_sample_histogram(values: np.ndarray, label: str, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(values, dtype=float), bins=40, color="tab:blue", alpha=0.8)
    ax.set_xlabel(label)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
