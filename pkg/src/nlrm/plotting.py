"""Standalone SVG plots: tail curves (log y) and scaling fits (log-log)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Date": None}


def plot_tail(path, grid, title="", profile=None):
    """grid: rows (t, prob, lower, upper).  Zero probabilities are dropped."""
    g = np.asarray(grid, dtype=np.float64)
    keep = g[:, 1] > 0
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.fill_between(g[keep, 0], np.maximum(g[keep, 2], 1e-12), g[keep, 3], alpha=0.3, label="95% band")
    ax.plot(g[keep, 0], g[keep, 1], "o-", ms=3, label="empirical")
    if profile is not None:
        ax.plot(g[:, 0], profile.evaluate(g[:, 0]), "--", label=f"{profile.family}, c={profile.c:.3g}")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("P(|F - m| >= t)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_scaling(path, x, y, slope=None, title="", xlabel="n", ylabel=""):
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(x, y, "o", label="measured")
    if slope is not None and np.all(y > 0):
        b = np.mean(np.log(y) - slope * np.log(x))
        ax.loglog(x, np.exp(b) * x ** slope, "--", label=f"slope {slope:.3f}")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path
