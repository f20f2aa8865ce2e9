"""Figure rendering for the report path.

Every function takes rows already loaded from the run's CSV outputs and
writes one PNG. Figures are derived views; the CSVs stay the source of
truth for comparisons and tests.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = [
    "read_csv_rows",
    "plot_edge_cut",
    "plot_load_imbalance",
    "plot_hit_rates",
    "plot_block_activity",
    "plot_pipeline",
    "plot_training",
    "render_all",
]


def read_csv_rows(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_edge_cut(rows, path: Path) -> Path:
    names = [r["partition_spec"] for r in rows]
    cuts = [float(r["edge_cut"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(range(len(names)), cuts, color="steelblue")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylabel("edge cut")
    ax.set_title("Edge cut by partitioner")
    fig.tight_layout()
    return _save(fig, path)


def plot_load_imbalance(comp_rows, path: Path) -> Path:
    # "all" rows hold the per-spec totals; per-id rows drive the imbalance
    by_key: dict[tuple[str, str], list[dict]] = defaultdict(list)
    for r in comp_rows:
        if r["partition_id"] != "all":
            by_key[(r["partition_spec"], r["sampler_spec"])].append(r)
    labels, values = [], []
    for (pname, sname), rs in sorted(by_key.items()):
        loads = [
            int(r["local_requests"]) + int(r["remote_requests"]) for r in rs
        ]
        mean = sum(loads) / len(loads)
        labels.append(f"{pname}\n{sname}")
        values.append(max(loads) / mean if mean > 0 else 1.0)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(labels)), values, color="darkorange")
    ax.axhline(1.0, color="gray", linestyle=":")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("max / mean request load")
    ax.set_title("Computation load imbalance")
    fig.tight_layout()
    return _save(fig, path)


def plot_hit_rates(transfer_rows, path: Path) -> Path:
    series: dict[tuple[str, str, str], list[tuple[float, float]]] = defaultdict(list)
    for r in transfer_rows:
        key = (r["partition_spec"], r["sampler_spec"], r["cache_policy"])
        series[key].append((float(r["cache_ratio"]), float(r["hit_rate"])))
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, pts in sorted(series.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label="/".join(key))
    ax.set_xlabel("cache capacity (fraction of vertices)")
    ax.set_ylabel("hit rate")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("Feature cache hit rate")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_block_activity(block_rows, path: Path) -> Path:
    series: dict[tuple, list[tuple[float, float, float]]] = defaultdict(list)
    for r in block_rows:
        key = (r["partition_spec"], r["sampler_spec"], r["cache_policy"],
               r["cache_ratio"])
        series[key].append(
            (float(r["threshold"]), float(r["eligible_before"]),
             float(r["eligible_after"]))
        )
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, pts in sorted(series.items()):
        pts.sort()
        xs = [p[0] for p in pts]
        ax.plot(xs, [p[1] for p in pts], marker="o", linestyle="-",
                label=f"{'/'.join(key)} before")
        ax.plot(xs, [p[2] for p in pts], marker="x", linestyle="--",
                label=f"{'/'.join(key)} after")
    ax.set_xlabel("activity threshold")
    ax.set_ylabel("fraction of touched blocks eligible")
    ax.set_title("Block transfer eligibility")
    ax.legend(fontsize=6)
    fig.tight_layout()
    return _save(fig, path)


def plot_pipeline(pipe_rows, path: Path) -> Path:
    pairs: dict[tuple, dict[str, float]] = defaultdict(dict)
    for r in pipe_rows:
        key = (r["partition_spec"], r["sampler_spec"], r["cache_policy"],
               r["cache_ratio"])
        pairs[key][r["mode"]] = float(r["makespan"])
    labels, seq, pipe = [], [], []
    for key, modes in sorted(pairs.items()):
        labels.append("/".join(key))
        seq.append(modes.get("sequential", 0.0))
        pipe.append(modes.get("pipelined", 0.0))
    x = range(len(labels))
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.4
    ax.bar([i - width / 2 for i in x], seq, width, label="sequential")
    ax.bar([i + width / 2 for i in x], pipe, width, label="pipelined")
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=6)
    ax.set_ylabel("modeled makespan")
    ax.set_title("Stage overlap")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def plot_training(trainlog_rows_by_name, path: Path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    for name, rows in sorted(trainlog_rows_by_name.items()):
        epochs = [int(r["epoch"]) for r in rows]
        ax1.plot(epochs, [float(r["loss"]) for r in rows], label=name)
        ax2.plot(epochs, [float(r["val_acc"]) for r in rows], label=name)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("training loss")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation accuracy")
    ax1.legend(fontsize=7)
    ax2.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def render_all(run_dir, fig_dir=None) -> list[Path]:
    """Render every figure the run directory has data for."""
    run_dir = Path(run_dir)
    fig_dir = Path(fig_dir) if fig_dir else run_dir / "figures"
    written: list[Path] = []

    pmetrics = run_dir / "partition_metrics.csv"
    if pmetrics.exists():
        rows = read_csv_rows(pmetrics)
        if rows:
            written.append(plot_edge_cut(rows, fig_dir / "edge_cut.png"))

    comp = run_dir / "comp_load.csv"
    if comp.exists():
        rows = read_csv_rows(comp)
        if rows:
            written.append(
                plot_load_imbalance(rows, fig_dir / "load_imbalance.png")
            )

    tr = run_dir / "transfer.csv"
    if tr.exists():
        rows = read_csv_rows(tr)
        if rows:
            written.append(plot_hit_rates(rows, fig_dir / "hit_rates.png"))

    blocks = run_dir / "block_activity.csv"
    if blocks.exists():
        rows = read_csv_rows(blocks)
        if rows:
            written.append(
                plot_block_activity(rows, fig_dir / "block_activity.png")
            )

    pipe = run_dir / "pipeline.csv"
    if pipe.exists():
        rows = read_csv_rows(pipe)
        if rows:
            written.append(plot_pipeline(rows, fig_dir / "pipeline.png"))

    logs = {
        p.stem.removeprefix("trainlog_"): read_csv_rows(p)
        for p in sorted(run_dir.glob("trainlog_*.csv"))
    }
    logs = {k: v for k, v in logs.items() if v}
    if logs:
        written.append(plot_training(logs, fig_dir / "training.png"))

    return written
