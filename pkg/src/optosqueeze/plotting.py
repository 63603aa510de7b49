"""Quick-look plots rendered from a sweep table (the CSV stays the contract)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .squeezing import THREE_DB  # noqa: E402

MEANFIELD_PANELS = ("alpha1_abs", "alpha2_abs", "beta_abs", "Lambda")


def _quantity(result) -> str:
    cols = result.columns
    axes = [a.name for a in result.spec.axes]
    if "rh_stable" in cols and len(axes) == 2:
        return "stable"
    if "theta" in axes and "S_theta_db" in cols:
        return "S_theta_db"
    return "S_theta0_db"


def render(result, path, quantity: str | None = None) -> str:
    """Line plot for one axis, one heatmap per series for two axes."""
    spec = result.spec
    if spec.mode == "physical" and len(spec.axes) == 1 and quantity is None:
        fig = _meanfield_lines(result)
    elif len(spec.axes) == 1:
        fig = _lines(result, quantity or _quantity(result))
    else:
        fig = _maps(result, quantity or _quantity(result))
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def _lines(result, q):
    axis = result.spec.axes[0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in result.series_labels():
        ax.plot(result.column(axis.name, label), result.column(q, label), label=label or q)
    if q.startswith("S_"):
        ax.axhline(THREE_DB, color="k", lw=0.8, ls="--")
    ax.set_xlabel(axis.name)
    ax.set_ylabel(q)
    if axis.scale == "log":
        ax.set_xscale("log")
    if len(result.series_labels()) > 1:
        ax.legend(fontsize=6)
    fig.tight_layout()
    return fig


def _meanfield_lines(result):
    axis = result.spec.axes[0]
    fig, axs = plt.subplots(2, 2, figsize=(8, 6))
    for ax, q in zip(axs.flat, MEANFIELD_PANELS):
        for label in result.series_labels():
            ax.plot(result.column(axis.name, label), result.column(q, label), label=label)
        ax.set_xscale("log" if axis.scale == "log" else "linear")
        ax.set_xlabel(axis.name)
        ax.set_ylabel(q)
    axs.flat[0].legend(fontsize=7)
    fig.tight_layout()
    return fig


def _maps(result, q):
    ax_x, ax_y = result.spec.axes
    labels = result.series_labels()
    ncol = min(3, len(labels))
    nrow = math.ceil(len(labels) / ncol)
    fig, axs = plt.subplots(nrow, ncol, figsize=(4 * ncol, 3.4 * nrow), squeeze=False)
    x, y = ax_x.values(), ax_y.values()
    for ax, label in zip(axs.flat, labels):
        Z = result.column(q, label).reshape(len(x), len(y)).T
        mesh = ax.pcolormesh(x, y, Z, shading="auto")
        fig.colorbar(mesh, ax=ax)
        if q.startswith("S_") and np.nanmax(Z) > THREE_DB > np.nanmin(Z):
            ax.contour(x, y, Z, levels=[THREE_DB], colors="w", linewidths=1.0)
        ax.set_title(label or q, fontsize=8)
        ax.set_xlabel(ax_x.name)
        ax.set_ylabel(ax_y.name)
    for ax in list(axs.flat)[len(labels):]:
        ax.axis("off")
    fig.tight_layout()
    return fig
