"""Matplotlib figures written next to the CLI tables (Agg backend, PNG)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def green_maps(x, y, maps: dict, path):
    """``maps[n_y]`` holds |G_11| on the ``(x, y)`` grid."""
    keys = list(maps)
    fig, axes = plt.subplots(1, len(keys), figsize=(4 * len(keys), 3.4), squeeze=False)
    for ax, k in zip(axes[0], keys):
        z = np.log10(np.maximum(maps[k].T, 1e-16))
        im = ax.pcolormesh(x, y, z, shading="auto", cmap="viridis")
        ax.set_title(f"log10 |G11|, n_y={k}")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        fig.colorbar(im, ax=ax)
    return _save(fig, path)


def field_maps(x, y, psi, path, title=""):
    """Real and imaginary parts of both spinor components; ``psi`` is ``(2, len(x), len(y))``."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True, sharey=True)
    for s in range(2):
        for p, part in enumerate((np.real, np.imag)):
            ax = axes[s, p]
            im = ax.pcolormesh(x, y, part(psi[s]).T, shading="auto", cmap="RdBu_r")
            ax.set_title(f"{'Re' if p == 0 else 'Im'} psi_{s + 1}")
            fig.colorbar(im, ax=ax)
    for ax in axes[-1]:
        ax.set_xlabel("x")
    for ax in axes[:, 0]:
        ax.set_ylabel("y")
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def current_fluctuations(x, samples, labels, path):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for c, lab in enumerate(labels):
        col = samples[:, c]
        ax.plot(x, col - col.mean(), ".-", ms=3, label=f"{lab}: mean {col.mean():.3g}")
    ax.set_xlabel("x")
    ax.set_ylabel("j(x) - mean")
    ax.legend(fontsize=8)
    return _save(fig, path)


def conductivity_curves(E, scales, j, labels, path):
    """``j[e, s, m]`` per energy, scale and mode (NaN where absent)."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
    for si, lam in enumerate(scales):
        for m, lab in enumerate(labels):
            axes[0].plot(E, j[:, si, m], lw=1, label=f"{lab}, lambda={lam:g}" if si == 0 else None)
        axes[1].plot(E, np.nansum(j[:, si, :], axis=1) + 1.0, ".-", label=f"lambda={lam:g}")
    axes[0].set_xlabel("E")
    axes[0].set_ylabel("j_m")
    axes[0].legend(fontsize=7)
    axes[1].set_xlabel("E")
    axes[1].set_ylabel("sum j_m + 1")
    axes[1].legend(fontsize=7)
    return _save(fig, path)


def scattering_grid(lengths, S_abs, labels, path):
    """``S_abs[l, p, n]`` as a grid of curves (row: outgoing, column: incoming)."""
    m = len(labels)
    fig, axes = plt.subplots(m, m, figsize=(2.2 * m, 1.8 * m), sharex=True, squeeze=False)
    for p in range(m):
        for n in range(m):
            ax = axes[p, n]
            ax.plot(lengths, S_abs[:, p, n], lw=1)
            ax.set_title(f"{labels[n]} -> {labels[p]}", fontsize=7)
            ax.tick_params(labelsize=6)
    return _save(fig, path)


def sweep_currents(lengths, j, labels, path):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for c, lab in enumerate(labels):
        ax.plot(lengths, j[:, c], lw=1, label=lab)
    ax.plot(lengths, j.sum(axis=1), "k--", lw=1, label="sum")
    ax.set_xlabel("slab length")
    ax.set_ylabel("j_m")
    ax.legend(fontsize=8)
    return _save(fig, path)


def convergence_curves(series: dict, path, xlabel="order"):
    """``series[name] = (orders, values)`` on a log scale."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for name, (xs, ys) in series.items():
        ax.semilogy(xs, np.maximum(np.asarray(ys, dtype=float), 1e-17), "o-", label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("relative error")
    ax.legend(fontsize=8)
    return _save(fig, path)
