"""Report emission: line-delimited records, summary tables, and figures.

Every CLI report path writes machine-readable JSONL next to a rendered
matplotlib figure, so results can be re-plotted externally or eyeballed
directly.
"""

from __future__ import annotations

import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import EvalReport


def write_jsonl(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def accuracy_summary(report: EvalReport) -> str:
    def fmt(v):
        return "   --" if v is None else f"{100 * v:5.1f}"

    lines = [
        "subset    queries  accuracy%",
        f"OS        {report.os_count:7d}  {fmt(report.os_accuracy)}",
        f"MS        {report.ms_count:7d}  {fmt(report.ms_accuracy)}",
        f"overall   {report.os_count + report.ms_count:7d}  {fmt(report.overall)}",
    ]
    if report.bins:
        lines.append("")
        lines.append("solutions  queries  accuracy%  mean givens")
        for b in report.bins:
            acc = "   --" if b.accuracy is None else f"{100 * b.accuracy:5.1f}"
            giv = "  --" if b.mean_givens is None else f"{b.mean_givens:4.1f}"
            lines.append(f"{b.label:>9}  {b.count:7d}  {acc:>9}  {giv:>11}")
    return "\n".join(lines) + "\n"


def bin_rows(report: EvalReport) -> list[dict]:
    return [{"bin": b.label, "lo": b.lo, "hi": b.hi, "count": b.count,
             "accuracy": b.accuracy, "mean_givens": b.mean_givens}
            for b in (report.bins or [])]


def fig_accuracy_vs_solutions(report: EvalReport, path) -> None:
    bins = [b for b in (report.bins or []) if b.count > 0]
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.arange(len(bins))
    ax.bar(xs, [b.accuracy for b in bins], color="steelblue")
    ax.set_xticks(xs)
    ax.set_xticklabels([b.label for b in bins])
    ax.set_xlabel("solutions per query")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.05)
    for x, b in zip(xs, bins):
        ax.annotate(f"n={b.count}", (x, b.accuracy), ha="center",
                    xytext=(0, 3), textcoords="offset points", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_givens_vs_solutions(report: EvalReport, path) -> None:
    bins = [b for b in (report.bins or []) if b.count > 0]
    fig, ax1 = plt.subplots(figsize=(6, 4))
    xs = np.arange(len(bins))
    ax1.bar(xs, [b.count for b in bins], color="lightgray", label="queries")
    ax1.set_xticks(xs)
    ax1.set_xticklabels([b.label for b in bins])
    ax1.set_xlabel("solutions per query")
    ax1.set_ylabel("queries")
    ax2 = ax1.twinx()
    ax2.plot(xs, [b.mean_givens for b in bins], "o-", color="firebrick",
             label="mean givens")
    ax2.set_ylabel("mean givens")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_training_curves(metrics: list[dict], path) -> None:
    main = [m for m in metrics if m["phase"] == "main"]
    fig, ax1 = plt.subplots(figsize=(7, 4))
    if main:
        xs = [m["update"] for m in main]
        losses = [m["train_loss"] for m in main]
        ax1.plot(xs, losses, color="steelblue", label="train loss")
        ax1.set_xlabel("update")
        ax1.set_ylabel("train loss")
        ax2 = ax1.twinx()
        ax2.plot(xs, [m["dev_overall"] for m in main], color="seagreen",
                 label="dev accuracy")
        ax2.set_ylabel("dev accuracy")
        ax2.set_ylim(0, 1.05)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_toy_logistic(report: dict, path) -> None:
    fig, ax = plt.subplots(figsize=(7, 3))
    pts = [(1.0, 5, "target {1}"), (-1.0, 4, "targets {0,1}"),
           (-2.0, 1, "target {1}")]
    for x, count, label in pts:
        ax.scatter([x] * count,
                   np.linspace(-0.25, 0.25, count) if count > 1 else [0.0],
                   s=60, label=f"x={x:+.0f} {label}")
    ax.axvline(0.0, color="green", ls=":", label="initial boundary")
    ax.axvline(report["minloss"]["boundary"], color="black",
               label=f"greedy ({report['minloss']['boundary']:.2f})")
    sel_b = report["selectr"]["boundary"]
    if np.isfinite(sel_b) and sel_b > -4:
        ax.axvline(sel_b, color="purple", ls="--",
                   label=f"selector ({sel_b:.2f})")
    ax.set_yticks([])
    ax.set_xlabel("x")
    ax.legend(fontsize=8, loc="upper left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def fig_toy_xor(report: dict, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(report["strategies"])
    xs = np.arange(len(names))
    width = 0.35
    for k, color in ((0, "steelblue"), (1, "seagreen")):
        ax.bar(xs + (k - 0.5) * width,
               [report["strategies"][n]["bit_probabilities"][k] for n in names],
               width, color=color, label=f"P(bit {k + 1} = second value)")
    ax.axhline(0.5, color="gray", ls=":")
    ax.set_xticks(xs)
    ax.set_xticklabels(names)
    ax.set_ylabel("probability")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
