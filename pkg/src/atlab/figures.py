"""Matplotlib renderings of the report CSVs, written next to them.

Each renderer takes the already-computed rows (the same ones that go into
the delimited output) and a target path; nothing here recomputes metrics.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "training_figure",
    "landscape_figure",
    "dmin_figure",
    "diversity_figure",
    "eval_figure",
]


def _epoch_rows(records):
    return [r for r in records if r.get("step") is None and r.get("clean_acc") is not None]


def training_figure(records, path) -> None:
    """Accuracy, attack-success, confidence, and step-time curves per epoch."""
    rows = _epoch_rows(records)
    if not rows:
        raise ValueError("training_figure: no epoch records to plot")
    epochs = [r["epoch"] for r in rows]
    fig, axes = plt.subplots(2, 2, figsize=(10, 7))

    ax = axes[0, 0]
    ax.plot(epochs, [r["clean_acc"] for r in rows], label="clean")
    ax.plot(epochs, [r["adv_acc_pgd50"] for r in rows], label="adversarial")
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy")
    ax.set_title("test accuracy")
    ax.legend()

    ax = axes[0, 1]
    ax.plot(epochs, [r["sr_single"] for r in rows], label="single-step")
    ax.plot(epochs, [r["sr_multi"] for r in rows], label="multi-step")
    ax.set_xlabel("epoch")
    ax.set_ylabel("success rate")
    ax.set_title("attack success rates")
    ax.legend()

    ax = axes[1, 0]
    ax.plot(epochs, [r["conf_ce"] for r in rows], color="tab:purple")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean CE vs uniform")
    ax.set_title("prediction confidence")

    ax = axes[1, 1]
    times = [(r["epoch"], r["step_ms"]) for r in rows if r.get("step_ms") is not None]
    if times:
        ax.plot([t[0] for t in times], [t[1] for t in times], color="tab:gray")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean step ms")
    ax.set_title("step time")

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def landscape_figure(ts, losses, std: float, path) -> None:
    """Surface plot of the probed loss slice; std annotated on the title."""
    t1, t2 = np.meshgrid(ts, ts, indexing="ij")
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    ax.plot_surface(t1, t2, np.asarray(losses), cmap="viridis", edgecolor="none")
    ax.set_xlabel("gradient direction")
    ax.set_ylabel("random direction")
    ax.set_zlabel("loss")
    ax.set_title(f"loss landscape (std = {std:.4g})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def dmin_figure(rows, path) -> None:
    """Histogram of d_min per method at a single radius, or mean-vs-radius lines."""
    methods = sorted({r["method"] for r in rows})
    epsilons = sorted({r["epsilon"] for r in rows})
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    if len(epsilons) == 1:
        for method in methods:
            vals = [r["d_min"] for r in rows if r["method"] == method]
            ax.hist(vals, bins=40, alpha=0.6, label=method)
        ax.set_xlabel("minimum pairwise distance")
        ax.set_ylabel("count")
        ax.set_title(f"space filling at radius {epsilons[0]:.4g}")
    else:
        for method in methods:
            means = [np.mean([r["d_min"] for r in rows
                              if r["method"] == method and r["epsilon"] == e])
                     for e in epsilons]
            ax.plot(epsilons, means, marker="o", label=method)
        ax.set_xlabel("radius")
        ax.set_ylabel("mean minimum pairwise distance")
        ax.set_title("space filling vs radius")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def diversity_figure(rows, path) -> None:
    """Bar chart of mean per-sample loss std for each attack/init combination."""
    labels = [f"{r['attack']}\n{r['init']}" for r in rows]
    values = [r["mean_std"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.bar(range(len(rows)), values, color="tab:blue")
    ax.set_xticks(range(len(rows)), labels)
    ax.set_ylabel("mean per-sample loss std")
    ax.set_title("adversarial loss diversity")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def eval_figure(rows, path) -> None:
    """Clean and adversarial accuracy against attack radius."""
    eps = [r["epsilon"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    ax.plot(eps, [r["clean_acc"] for r in rows], marker="o", label="clean")
    ax.plot(eps, [r["adv_acc"] for r in rows], marker="o", label="adversarial")
    ax.set_xlabel("attack radius")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.set_title("robustness evaluation")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
