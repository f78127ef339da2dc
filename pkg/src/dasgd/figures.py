"""Report figures rendered next to the delimited outputs.

Everything draws through the Agg backend so runs are headless and the PNG
bytes are reproducible for a fixed input.
"""
from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_cost_curves", "save_regret_curve", "save_timing_chart"]

_STYLE = {
    "figure.figsize": (5.5, 3.8),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
}

_MARKERS = ("o", "s", "^", "d", "v", "*")


def _slug(v: float) -> str:
    return repr(float(v)).replace(".", "p").replace("-", "m")


def _curve_figure(rows: list[dict], value: str, title: str, path: str,
                  floor: float | None = None) -> None:
    methods = sorted({r["method"] for r in rows})
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for i, m in enumerate(methods):
            pts = sorted((r["n"], r[value]) for r in rows if r["method"] == m)
            ax.plot([p[0] for p in pts], [p[1] for p in pts],
                    marker=_MARKERS[i % len(_MARKERS)], label=m)
        if floor is not None:
            ax.axhline(floor, color="gray", linestyle="--", linewidth=1,
                       label="clairvoyant")
        ax.set_xscale("log")
        positive = all(r[value] > 0 for r in rows)
        if positive:
            ax.set_yscale("log")
        ax.set_xlabel("training samples n")
        ax.set_ylabel(value.replace("_", " "))
        ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def save_cost_curves(summary_rows: list[dict], out_dir: str,
                     oracle: dict | None = None) -> list[str]:
    """One mean-cost and one variance figure per (s, sigma) cell group.

    oracle, when given, maps (s, sigma) to the clairvoyant cost drawn as a
    dashed floor under the mean curves.
    """
    paths: list[str] = []
    cells = sorted({(r["s"], r["sigma"]) for r in summary_rows})
    for s, sigma in cells:
        rows = [r for r in summary_rows if r["s"] == s and r["sigma"] == sigma]
        for value, label in (("mean_cost", "mean"), ("var_cost", "var")):
            floor = oracle.get((s, sigma)) if (oracle and value == "mean_cost") else None
            path = os.path.join(out_dir, f"cost_{label}_s{s}_sigma{_slug(sigma)}.png")
            _curve_figure(rows, value,
                          f"out-of-sample cost {label} (s={s}, sigma={sigma})", path,
                          floor=floor)
            paths.append(path)
    return paths


def save_regret_curve(rows: list[dict], path: str) -> str:
    """Cumulative regret vs step on log-log axes with a sqrt reference."""
    t = np.array([r["t"] for r in rows], dtype=float)
    cum = np.array([r["cum_regret"] for r in rows], dtype=float)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, np.maximum(cum, 1e-12), label="cumulative regret")
        if cum[-1] > 0:
            ref = cum[-1] * np.sqrt(t / t[-1])
            ax.plot(t, ref, "--", label="sqrt(T) reference")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("step t")
        ax.set_ylabel("cumulative regret")
        ax.set_title("online regret")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path


def save_timing_chart(rows: list[dict], methods: list[str], path: str) -> str:
    """Mean wall-clock per cell, one line per (s, method)."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        s_values = sorted({r["s"] for r in rows})
        i = 0
        for s in s_values:
            sub = sorted((r["n"], r) for r in rows if r["s"] == s)
            for m in methods:
                ys = [r[m] for _, r in sub]
                if all(isinstance(v, float) and math.isnan(v) for v in ys):
                    continue
                ax.plot([n for n, _ in sub], ys,
                        marker=_MARKERS[i % len(_MARKERS)], label=f"{m} (s={s})")
                i += 1
        ax.set_xscale("log")
        ax.set_xlabel("training samples n")
        ax.set_ylabel("seconds per instance")
        ax.set_title("wall-clock vs data size")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
