"""Matplotlib figures written next to the CSV/JSON outputs of the CLI."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["plot_mesh", "plot_spectrum", "plot_sweep", "plot_semigroup"]

_RC = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_mesh(mesh, path, title: str | None = None) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.triplot(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles, lw=0.4, color="0.35")
        b = mesh.vertices[np.append(mesh.boundary_nodes, mesh.boundary_nodes[0])]
        ax.plot(b[:, 0], b[:, 1], color="C3", lw=1.0)
        ax.set_aspect("equal")
        ax.set_title(title or f"{mesh.shape}: {mesh.n_vertices} vertices, h = {mesh.h:.3g}")
        ax.set_xticks([])
        ax.set_yticks([])
        return _save(fig, path)


def plot_spectrum(eigenvalues, path, title: str = "spectrum") -> Path:
    mu = np.asarray(eigenvalues)
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7, 3))
        ax1.plot(np.arange(len(mu)), np.real(mu), "o", ms=3)
        ax1.set_xlabel("index")
        ax1.set_ylabel("Re mu")
        ax2.plot(np.real(mu), np.imag(mu), "x", ms=4)
        ax2.axhline(0.0, color="0.7", lw=0.5)
        ax2.set_xlabel("Re mu")
        ax2.set_ylabel("Im mu")
        fig.suptitle(title)
        return _save(fig, path)


def plot_sweep(rows, path, poles=(), title: str = "DtN eigenvalue branches") -> Path:
    """``rows`` are ``(lam, k, re_mu, im_mu)`` tuples; one curve per branch index."""
    data = np.array(rows, dtype=float) if rows else np.zeros((0, 4))
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for k in np.unique(data[:, 1]).astype(int) if len(data) else []:
            sel = data[:, 1] == k
            ax.plot(data[sel, 0], data[sel, 2], ".-", ms=2, lw=0.8, label=f"k={k}")
        for p in poles:
            ax.axvline(p, color="0.6", ls="--", lw=0.6)
        ax.axhline(0.0, color="0.8", lw=0.5)
        if len(data):
            lo, hi = np.percentile(data[:, 2], [2, 98])
            pad = 0.1 * (hi - lo + 1.0)
            ax.set_ylim(lo - pad, hi + pad)
        ax.set_xlabel("lambda")
        ax.set_ylabel("Re mu_k(lambda)")
        ax.set_title(title)
        if len(data):
            ax.legend(ncol=2, loc="best")
        return _save(fig, path)


def plot_semigroup(E, path, t: float, title: str | None = None) -> Path:
    E = np.asarray(E)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 4))
        im = ax.imshow(E, cmap="viridis", interpolation="nearest")
        fig.colorbar(im, ax=ax, shrink=0.8)
        ax.set_title(title or f"exp(-tD), t = {t:g}; min entry {E.min():.2e}")
        ax.set_xlabel("boundary node")
        ax.set_ylabel("boundary node")
        return _save(fig, path)
