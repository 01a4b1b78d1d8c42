"""Matplotlib figures written next to the CSV reports."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from keyflood import engine  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_bench(report, path: str | Path) -> Path:
    """Rounds against diameter, one line per key length, baseline dashed."""
    fig, (ax, ax_ratio) = plt.subplots(1, 2, figsize=(11, 4.2))
    fast = report.fast()
    for length in sorted({p.key_length for p in fast}):
        pts = sorted((p for p in fast if p.key_length == length), key=lambda p: p.diameter)
        line, = ax.plot([p.diameter for p in pts], [p.rounds for p in pts], marker="o",
                        label=f"|K|={length}")
        ax.plot([p.diameter for p in pts], [p.bound for p in pts], ls=":", color=line.get_color())
        ax_ratio.plot([p.diameter for p in pts], [p.ratio for p in pts], marker="o",
                      color=line.get_color(), label=f"|K|={length}")
    base = sorted(report.baseline(), key=lambda p: (p.key_length, p.diameter))
    if base:
        ax.plot([p.diameter for p in base], [p.rounds for p in base], marker="s", ls="--",
                color="black", label="restart flooding")
    ax.set_yscale("log")
    ax.set_xlabel("diameter D")
    ax.set_ylabel("termination round")
    ax.set_title("rings; dotted: allowed bound")
    ax.legend(fontsize=8)
    ax_ratio.set_xlabel("diameter D")
    ax_ratio.set_ylabel("T / (D ceil(log2 L) + L)")
    ax_ratio.set_ylim(bottom=0)
    ax_ratio.legend(fontsize=8)
    return _save(fig, path)


def plot_suite(rows: Sequence[dict], path: str | Path) -> Path:
    """Termination round against D*ceil(log2 L) + L, and the delay slack histogram."""
    fig, (ax, ax_slack) = plt.subplots(1, 2, figsize=(11, 4.2))
    for variant in sorted({r["variant"] for r in rows}):
        sel = [r for r in rows if r["variant"] == variant and r["termination_round"] not in (None, "")]
        x = [int(r["diameter"]) * (int(r["key_length"]) - 1).bit_length() + int(r["key_length"])
             for r in sel]
        ax.scatter(x, [int(r["termination_round"]) for r in sel], s=8, alpha=0.6, label=variant)
    ax.set_xlabel("D ceil(log2 L) + L")
    ax.set_ylabel("termination round")
    ax.legend(fontsize=8)
    slacks = [int(r["delay_slack"]) for r in rows if r.get("delay_slack") not in (None, "")]
    if slacks:
        lo, hi = min(slacks), max(slacks)
        ax_slack.hist(slacks, bins=range(lo, hi + 2), align="left", rwidth=0.8)
    ax_slack.axvline(-0.5, color="red", ls="--")
    ax_slack.set_xlabel("min neighbour slack of the delay inequality")
    ax_slack.set_ylabel("runs")
    return _save(fig, path)


def plot_delays(trace: engine.Trace, path: str | Path, max_nodes: int = 12) -> Path:
    """Per-node delay series of one run."""
    report = engine.delays(trace)
    fig, ax = plt.subplots(figsize=(7, 4.2))
    dist = trace.network.distances_from(trace.network.min_node)
    nodes = sorted(report.series, key=lambda v: (dist[v], v))[:max_nodes]
    for v in nodes:
        series = report.series[v]
        if series:
            ax.step([t for t, _ in series], [d for _, d in series], where="post",
                    label=f"node {v} (hop {dist[v]})")
    ax.set_xlabel("step")
    ax.set_ylabel("delay")
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, path)
