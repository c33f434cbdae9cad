"""Matplotlib renderings written next to the delimited report files."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_timeseries(rows, path):
    """Energy / overlap / derivative-norm traces of one run."""
    t = np.array([r["t"] for r in rows])
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.2))
    axes[0].plot(t, [r["energy"] for r in rows], "-", color="tab:blue")
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("energy")
    axes[1].semilogy(t, np.maximum([r["overlap_l2sq"] for r in rows], 1e-300),
                     "-", color="tab:red")
    axes[1].set_xlabel("t")
    axes[1].set_ylabel(r"$\int u^2 v^2$")
    axes[2].semilogy(t[1:], np.maximum([r["du_norm"] for r in rows[1:]], 1e-300),
                     "-", label="|du/dt|")
    axes[2].semilogy(t[1:], np.maximum([r["dv_norm"] for r in rows[1:]], 1e-300),
                     "--", label="|dv/dt|")
    axes[2].set_xlabel("t")
    axes[2].legend(frameon=False)
    _save(fig, path)


def plot_state(state, path, title=None):
    """Final (u, v) profiles: curves in 1D, panels in 2D."""
    g = state.u.grid
    if g.dim == 1:
        x = g.axis_coords()[0]
        fig, ax = plt.subplots(figsize=(6, 3.2))
        ax.plot(x, state.u.values, "-", color="tab:blue", label="u")
        ax.plot(x, state.v.values, "-", color="tab:red", label="v")
        ax.set_xlabel("x")
        ax.legend(frameon=False)
    else:
        fig, axes = plt.subplots(1, 2, figsize=(8, 3.4))
        for ax, f, name in ((axes[0], state.u, "u"), (axes[1], state.v, "v")):
            im = ax.imshow(f.values.T, origin="lower", cmap="viridis",
                           extent=(0, g.lengths[0], 0, g.lengths[1]))
            ax.set_title(name)
            fig.colorbar(im, ax=ax, shrink=0.8)
    if title:
        fig.suptitle(title)
    _save(fig, path)


def plot_overlap_vs_kappa(kappas, overlaps, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.loglog(kappas, np.maximum(overlaps, 1e-300), "o-", color="tab:red")
    ax.set_xlabel(r"$\kappa$")
    ax.set_ylabel(r"stabilized $\int u^2 v^2$")
    _save(fig, path)


def plot_sup_h_vs_kappa(kappas, sup_h, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.4))
    ax.semilogx(kappas, sup_h, "s-", color="tab:blue")
    ax.set_xlabel(r"$\kappa$")
    ax.set_ylabel(r"$\sup_t$ product $H^1$ norm")
    _save(fig, path)
