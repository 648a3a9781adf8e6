"""Render comparison results as figures (error versus flops, log-log)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_comparison"]

_FLOOR = 1e-17  # keep exact zeros plottable on the log axis


def plot_comparison(result, path, dpi=144):
    """Plot median error with a min-max band per algorithm and save to path.

    The x axis is the comparison flop axis of the result (model or counted);
    both axes are logarithmic, matching how the convergence behavior is read.
    """
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for alg, agg in result.aggregates.items():
        x = agg.checkpoints
        med = np.maximum(agg.err_median, _FLOOR)
        lo = np.maximum(agg.err_min, _FLOOR)
        hi = np.maximum(agg.err_max, _FLOOR)
        (line,) = ax.plot(x, med, label=alg)
        ax.fill_between(x, lo, hi, alpha=0.2, color=line.get_color(), linewidth=0)
    axis = result.metadata.get("axis", "model")
    ensemble = result.metadata.get("ensemble", "")
    trials = result.metadata.get("trials", "?")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(f"{axis} flops")
    ax.set_ylabel("approximation error ||x - x*||")
    ax.set_title(f"{ensemble}: median error over {trials} trials (band: min-max)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
