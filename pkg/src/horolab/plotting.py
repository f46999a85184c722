"""SVG figures for experiment reports (headless matplotlib)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
# fixed salt makes the element ids in SVG output reproducible
matplotlib.rcParams["svg.hashsalt"] = "horolab"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from horolab.rates import EXPONENTIAL, POWER  # noqa: E402

# fixed metadata keeps the SVG bytes independent of the run date
_SVG_META = {"Date": None, "Creator": "horolab"}


def plot_report(report, path) -> None:
    layout = report.plot
    cols = report.columns
    data = np.array([[float(v) for v in row] for row in report.rows if _numeric(row)])
    if data.size == 0:
        return
    x = data[:, cols.index(layout["x"])]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for name in layout["y"]:
        y = data[:, cols.index(name)]
        if "err" in layout:
            ax.errorbar(x, y, yerr=data[:, cols.index(layout["err"])], marker="o", capsize=3, label=name)
        elif layout.get("kind") == "points":
            ax.plot(x, y, "o", label=name)
        else:
            ax.plot(x, y, marker="o", label=name)
    if layout.get("fit") and report.fit:
        fit = report.fit
        grid = np.linspace(x[x > 0].min(), x.max(), 200)
        if fit["model"] == POWER:
            curve = fit["prefactor"] * grid ** (-fit["kappa"])
        elif fit["model"] == EXPONENTIAL:
            curve = fit["prefactor"] * np.exp(-fit["kappa"] * grid)
        ax.plot(grid, curve, "--", color="0.4", label=f"fit, kappa = {fit['kappa']:.3f}")
    if "hline" in layout:
        ax.axhline(layout["hline"], color="0.5", ls=":", label="reference")
    if layout.get("logx"):
        ax.set_xscale("log")
    if layout.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel(layout["x"])
    ax.set_title(report.id)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def _numeric(row) -> bool:
    try:
        [float(v) for v in row]
    except (TypeError, ValueError):
        return False
    return True
