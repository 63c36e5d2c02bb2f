"""Figure rendering for run and benchmark outputs.

The delimited files are the contract; these helpers are a downstream
consumer that turns them into quick-look PNGs (accuracy, losses, and
channel time per round; median seconds per operation for benchmarks).
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_metrics_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def render_metrics_png(metrics_csv: str | Path, out_png: str | Path) -> Path:
    """Three panels per round: server accuracy, losses, channel time."""
    rows = read_metrics_csv(metrics_csv)
    if not rows:
        raise ValueError(f"no metric rows in {metrics_csv}")
    rounds = [int(r["round"]) for r in rows]
    acc = [float(r["server_test_acc"]) for r in rows]
    val_loss = [float(r["server_val_loss"]) for r in rows]
    dev_loss = [float(r["avg_device_loss"]) for r in rows]
    comm = [float(r["comm_time_s"]) for r in rows]
    channel = rows[0]["channel"]

    fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
    axes[0].plot(rounds, acc, marker="o")
    axes[0].set_ylabel("server test accuracy")
    axes[0].set_ylim(0.0, 1.0)
    axes[1].plot(rounds, val_loss, marker="o", label="server val loss")
    axes[1].plot(rounds, dev_loss, marker="s", label="avg device loss")
    axes[1].set_ylabel("loss")
    axes[1].legend(fontsize=8)
    axes[2].plot(rounds, comm, marker="o")
    axes[2].set_ylabel("comm time (s)")
    for ax in axes:
        ax.set_xlabel("round")
        ax.grid(True, alpha=0.3)
    fig.suptitle(f"channel: {channel}")
    fig.tight_layout()
    out_png = Path(out_png)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png


def render_bench_png(records, out_png: str | Path) -> Path:
    """Bar chart of median seconds per (scheme, op)."""
    labels = [f"{r.scheme}\n{r.op}" for r in records]
    values = [r.median_seconds for r in records]
    fig, ax = plt.subplots(figsize=(1.2 * max(4, len(labels)), 3.5))
    ax.bar(range(len(labels)), values, color="#3b6ea5")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("median seconds")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    out_png = Path(out_png)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png
