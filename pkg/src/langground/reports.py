"""Report rendering: JSON + CSV tables with matplotlib figures next to them.

Every ``write_*`` function drops three artifacts into the output directory:
a machine-readable JSON document, a delimited CSV table, and a PNG figure of
the same numbers.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import CrossLevelReport, EvalReport, TimingReport


def _ensure_dir(outdir: str | Path) -> Path:
    path = Path(outdir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_cv_report(reports: list[EvalReport], outdir: str | Path) -> list[Path]:
    outdir = _ensure_dir(outdir)
    json_path = outdir / "cv_report.json"
    csv_path = outdir / "cv_report.csv"
    fig_path = outdir / "cv_accuracy.png"
    json_path.write_text(
        json.dumps({r.model_kind: r.to_dict() for r in reports}, indent=1)
    )
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "level_accuracy", "reward_accuracy", "k", "seed"])
        for r in reports:
            writer.writerow(
                [r.model_kind, f"{r.level_accuracy:.4f}",
                 f"{r.reward_accuracy:.4f}", r.k, r.seed]
            )
    labels = [r.model_kind for r in reports]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(x - 0.18, [r.level_accuracy for r in reports], width=0.36,
           label="level selection")
    ax.bar(x + 0.18, [r.reward_accuracy for r in reports], width=0.36,
           label="reward grounding")
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title("10-fold cross-validation accuracy")
    ax.legend(loc="lower right")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [json_path, csv_path, fig_path]


def write_cross_level_report(report: CrossLevelReport,
                             outdir: str | Path) -> list[Path]:
    outdir = _ensure_dir(outdir)
    stem = f"cross_level_{report.model_kind.replace('-', '_')}"
    json_path = outdir / f"{stem}.json"
    csv_path = outdir / f"{stem}.csv"
    fig_path = outdir / f"{stem}.png"
    json_path.write_text(json.dumps(report.to_dict(), indent=1))
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["train\\eval", "L0", "L1", "L2"])
        for i, row in enumerate(report.matrix):
            writer.writerow([f"L{i}"] + [f"{v:.4f}" for v in row])
    matrix = np.array(report.matrix)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(matrix, vmin=0, vmax=1, cmap="viridis")
    for i in range(3):
        for j in range(3):
            ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center",
                    color="white" if matrix[i, j] < 0.6 else "black")
    ax.set_xticks(range(3), [f"eval L{j}" for j in range(3)])
    ax.set_yticks(range(3), [f"train L{i}" for i in range(3)])
    ax.set_title(f"{report.model_kind}: single-level task grounding")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [json_path, csv_path, fig_path]


def write_timing_report(report: TimingReport, outdir: str | Path,
                        tag: str = "timing") -> list[Path]:
    outdir = _ensure_dir(outdir)
    json_path = outdir / f"{tag}_report.json"
    csv_path = outdir / f"{tag}_report.csv"
    fig_path = outdir / f"{tag}_ratios.png"
    json_path.write_text(json.dumps(report.to_dict(), indent=1))
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair", "q1", "median", "q3", "n"])
        for pair, (q1, med, q3) in report.quartiles.items():
            writer.writerow([pair, f"{q1:.4f}", f"{med:.4f}", f"{q3:.4f}",
                             len(report.ratios[pair])])
    pairs = list(report.ratios)
    fig, ax = plt.subplots(figsize=(6, 4.2))
    if pairs and all(report.ratios[p] for p in pairs):
        ax.boxplot([report.ratios[p] for p in pairs], tick_labels=pairs,
                   showfliers=False)
    ax.axhline(1.0, color="crimson", linestyle="--", linewidth=1,
               label="numerator = denominator")
    ax.set_yscale("log")
    ax.set_ylabel("relative inference + planning time")
    ax.set_title("planner time ratios (lower favors the numerator)")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return [json_path, csv_path, fig_path]
