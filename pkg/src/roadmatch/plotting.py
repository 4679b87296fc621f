"""Figures for match runs and Monte-Carlo reports (written to files only)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _clean(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)


def plot_match(road_map, results, path, truth=None, title=None):
    """Map with matched track (left) and per-segment weights over time (right)."""
    fig, (ax_map, ax_w) = plt.subplots(1, 2, figsize=(11, 4.5),
                                       gridspec_kw={"width_ratios": [1.2, 1]})
    for seg in road_map.segments:
        ax_map.plot([seg.a.x, seg.b.x], [seg.a.y, seg.b.y], color="0.75", lw=3, solid_capstyle="round")
        ax_map.annotate(str(seg.id), ((seg.a.x + seg.b.x) / 2, (seg.a.y + seg.b.y) / 2),
                        fontsize=7, color="0.4")
    if truth is not None:
        ax_map.plot(truth.poses[:, 0], truth.poses[:, 1], "k-", lw=0.8, label="truth")
    best = np.array([r.best.mean for r in results])
    ax_map.plot(best[:, 0], best[:, 1], "x", color=PALETTE[3], ms=4, label="most probable")
    gps = [r for r in results if r.gps_used]
    if gps:
        ax_map.plot([], [], " ", label=f"GPS in {len(gps)}/{len(results)} steps")
    ax_map.set_aspect("equal", adjustable="datalim")
    ax_map.set_xlabel("east [m]")
    ax_map.set_ylabel("north [m]")
    ax_map.legend(fontsize=7, frameon=False)
    _clean(ax_map)

    ids = sorted({sid for r in results for sid, _, _ in r.hypotheses if sid is not None})
    steps = [r.step for r in results]
    for k, sid in enumerate(ids):
        w = [r.weights.get(sid, 0.0) for r in results]
        ax_w.plot(steps, w, color=PALETTE[k % len(PALETTE)], lw=1.2, label=f"segment {sid}")
    ax_w.set_ylim(-0.02, 1.02)
    ax_w.set_xlabel("step")
    ax_w.set_ylabel("posterior weight")
    if len(ids) <= 12:
        ax_w.legend(fontsize=7, frameon=False, ncol=2)
    _clean(ax_w)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_mc(report: dict, path):
    """Correct-segment rate per seed and the disambiguation-step histogram."""
    fig, (ax_r, ax_d) = plt.subplots(1, 2, figsize=(9, 3.5))
    seeds = [run["seed"] for run in report["runs"]]
    rates = [run["correct_rate"] for run in report["runs"]]
    ax_r.plot(seeds, rates, "o", color=PALETTE[0], ms=3)
    ax_r.set_ylim(-0.02, 1.02)
    ax_r.set_xlabel("seed")
    ax_r.set_ylabel("correct-segment rate")
    _clean(ax_r)
    steps = [d for d in report["disambiguation_steps"] if d is not None]
    if steps:
        ax_d.hist(steps, bins=np.arange(0, max(steps) + 2) - 0.5, color=PALETTE[1])
    ax_d.set_xlabel("steps to disambiguation")
    ax_d.set_ylabel("events")
    _clean(ax_d)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
