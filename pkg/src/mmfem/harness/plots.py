"""Figures rendered next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def convergence_figure(reports, path):
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for r in reports:
        axes[0].loglog(r.h, r.err_l2, "o-", label=f"p={r.degree} ({r.l2_rate:.2f})")
        axes[1].loglog(r.h, r.err_h1, "s-", label=f"p={r.degree} ({r.h1_rate:.2f})")
    axes[0].set_xlabel("h")
    axes[0].set_ylabel("L2 error")
    axes[1].set_xlabel("h")
    axes[1].set_ylabel("H1 error")
    for ax in axes:
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def thin_figure(rows, path):
    rows = list(rows)
    k = [r[1] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    axes[0].semilogy(k, [r[3] for r in rows], "o-", label="L2")
    axes[0].semilogy(k, [r[4] for r in rows], "s-", label="H1")
    axes[0].set_xlabel("k (separation $2^{-k}$)")
    axes[0].set_ylabel("error")
    axes[0].legend(fontsize=8)
    axes[1].semilogy(k, [r[5] for r in rows], "o-")
    axes[1].set_xlabel("k (separation $2^{-k}$)")
    axes[1].set_ylabel("condition number")
    for ax in axes:
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def condscale_figure(rows, slope, path):
    rows = list(rows)
    h = np.array([r[1] for r in rows])
    kappa = np.array([r[2] for r in rows])
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.loglog(h, kappa, "o-", label=f"slope {slope:.2f}")
    ax.loglog(h, kappa[0] * (h / h[0]) ** -2, "k--", alpha=0.5, label="$h^{-2}$")
    ax.set_xlabel("h")
    ax.set_ylabel("condition number")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def electro_figure(rows, box_half, path):
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    bodies = sorted({r[2] for r in rows})
    for b in bodies:
        xs = [r[3] for r in rows if r[2] == b]
        ys = [r[4] for r in rows if r[2] == b]
        ax.plot(xs, ys, "-", label=f"body {b}")
        ax.plot(xs[0], ys[0], "ko", ms=4)
    box = plt.Rectangle((-box_half, -box_half), 2 * box_half, 2 * box_half,
                        fill=False, ls="--", color="gray")
    ax.add_patch(box)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
