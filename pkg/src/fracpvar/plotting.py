"""Static figures for CLI reports (Agg backend, reproducible PNG bytes)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .domain import Field  # noqa: E402

__all__ = ["plot_levels", "plot_seminorms", "plot_solution"]

# no software/version stamp so identical data gives identical files
PNG_METADATA = {"Software": None}
DPI = 100


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def plot_levels(radii, levels, path, *, r: float | None = None, cap: float | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(radii, levels, "o-", label="level")
    if r is not None:
        ax.axhline(r, color="tab:red", ls="--", label="r")
    if cap is not None:
        ax.axhline(cap, color="tab:red", ls="--", label="cap J(tau zeta)")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("ball radius R")
    ax.set_ylabel("level")
    ax.legend()
    return _save(fig, Path(path))


def plot_seminorms(radii, roots, path, *, M: float | None = None, T=None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(radii, roots, "o-", label="S(u)^(1/p)")
    if T is not None:
        ax.plot(radii, T, "s-", label="T(u)")
    if M is not None and np.isfinite(M):
        ax.axhline(M, color="tab:red", ls="--", label="M")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("ball radius R")
    ax.legend()
    return _save(fig, Path(path))


def plot_solution(u: Field, path, title: str = "") -> Path:
    grid = u.grid
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if grid.dim == 1:
        ax.plot(grid.nodes[:, 0], u.values, "-")
        ax.set_xlabel("x")
        ax.set_ylabel("u")
    else:
        sc = ax.scatter(grid.nodes[:, 0], grid.nodes[:, 1], c=u.values, s=8, marker="s")
        fig.colorbar(sc, ax=ax, label="u")
        ax.set_aspect("equal")
    if title:
        ax.set_title(title)
    return _save(fig, Path(path))
