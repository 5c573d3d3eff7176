"""Figures for the report path.  Files only; never opens a window."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 3.6),
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "savefig.dpi": 150,
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def precision_series(bits: Sequence[float], path: Path, floor: float = 20.0,
                     bound_bits: Sequence[float] | None = None) -> Path:
    """Estimated precision per update, with the acceptance floor drawn in."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(range(1, len(bits) + 1), bits, lw=0.8, label="measured (relative)")
        if bound_bits is not None:
            ax.plot(range(1, len(bound_bits) + 1), bound_bits, lw=0.8, alpha=0.7, label="tracked bound (absolute)")
        ax.axhline(floor, color="k", ls="--", lw=0.8, label=f"{floor:g}-bit floor")
        ax.set_xlabel("update")
        ax.set_ylabel("precision [bits]")
        ax.legend(frameon=False, loc="lower right")
        return _save(fig, path)


def diff_histogram(diffs: Sequence[float], path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(diffs, bins=50, color="0.3")
        ax.set_xlabel("|encrypted - plaintext| [rating points]")
        ax.set_ylabel("updates")
        return _save(fig, path)


def bench_bars(rows: Sequence[dict], path: Path) -> Path:
    """Mean time per operation on a log axis, one bar group per label."""
    labels = sorted({r["label"] for r in rows})
    ops = list(dict.fromkeys(r["operation"] for r in rows))
    width = 0.8 / max(1, len(labels))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.2, 3.6))
        for k, label in enumerate(labels):
            means = {r["operation"]: r["mean_ms"] for r in rows if r["label"] == label}
            xs = [i + k * width for i in range(len(ops))]
            ax.bar(xs, [means.get(op, 0.0) for op in ops], width, label=label)
        ax.set_yscale("log")
        ax.set_xticks([i + width * (len(labels) - 1) / 2 for i in range(len(ops))])
        ax.set_xticklabels(ops, rotation=35, ha="right")
        ax.set_ylabel("mean time [ms]")
        if len(labels) > 1:
            ax.legend(frameon=False)
        return _save(fig, path)
