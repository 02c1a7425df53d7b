"""Deterministic SVG output (fixed hash salt, no date metadata)."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .params import REGIMES  # noqa: E402

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
)
_RC = {"svg.hashsalt": "microbranch", "svg.fonttype": "none", "font.size": 9}


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return buf.getvalue()


def regime_color(label: str) -> str:
    return PALETTE[REGIMES.index(label) % len(PALETTE)] if label in REGIMES else PALETTE[-1]


def phase_diagram_svg(diagram) -> str:
    """Regime map on log-log axes, one colour per regime label."""
    a, b = diagram.spec.axes
    labels = diagram.labels()
    present = [r for r in REGIMES if np.any(labels == r)]
    index = np.vectorize(lambda s: present.index(s))(labels).astype(float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.5, 4.2))
        xe = _edges(a.values)
        ye = _edges(b.values)
        cmap = ListedColormap([regime_color(r) for r in present])
        ax.pcolormesh(xe, ye, index.T, cmap=cmap, vmin=-0.5, vmax=len(present) - 0.5, shading="flat")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(a.name)
        ax.set_ylabel(b.name)
        handles = [plt.Rectangle((0, 0), 1, 1, color=regime_color(r)) for r in present]
        ax.legend(handles, present, loc="upper left", fontsize=7, framealpha=0.9)
        fig.tight_layout()
        return _svg(fig)


def _edges(v: np.ndarray) -> np.ndarray:
    lv = np.log(v)
    mid = 0.5 * (lv[1:] + lv[:-1])
    return np.exp(np.concatenate(([2 * lv[0] - mid[0]], mid, [2 * lv[-1] - mid[-1]])))


def fit_svg(result) -> str:
    """Energy against the swept parameter with the fitted power law."""
    x = np.array([r[0] for r in result.rows])
    y = np.array([r[1] for r in result.rows])
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.8))
        ax.loglog(x, y, "o", color=PALETTE[0], label=f"{result.family}")
        ax.loglog(x, np.exp(result.intercept) * x**result.slope, "-", color=PALETTE[1],
                  label=f"slope {result.slope:.4f}")
        ax.set_xlabel(result.param)
        ax.set_ylabel("energy")
        ax.legend()
        fig.tight_layout()
        return _svg(fig)


def field_svg(field, nx: int = 300, ny: int = 300) -> str:
    """Slope bits of a two-slope field sampled on a regular grid (slab and austenite grey)."""
    x = np.linspace(-field.L, 0.0, nx, endpoint=False) + 0.5 * field.L / nx
    y = (np.arange(ny) + 0.5) / ny * field.height
    X, Y = np.meshgrid(x, y, indexing="xy")
    bits = field.slope_bit(X, Y).astype(float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 4.0))
        cmap = ListedColormap(["#bbbbbb", "#f4f4f4", "#1f3b73"])
        ax.imshow(bits, origin="lower", extent=(-field.L, 0.0, 0.0, field.height), aspect="auto",
                  cmap=cmap, vmin=-1.5, vmax=1.5, interpolation="nearest")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        fig.tight_layout()
        return _svg(fig)
