"""Matplotlib renderings for the report paths. Headless backend only."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .analytics import LinearFit


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def fig_fit(points: list[tuple[float, float]], fit: LinearFit, path: Path) -> Path:
    xs = [c for c, _ in points]
    ys = [s for _, s in points]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.scatter(xs, ys, color="#1f5fa8", zorder=3, label="mean topology size")
    line_x = [min(xs), max(xs)]
    line_y = [fit.bias + fit.slope * x for x in line_x]
    ax.plot(line_x, line_y, color="#c44e52", label=f"{fit.slope:.4f} C + {fit.bias:.4f}")
    ax.set_xlabel("complexity C")
    ax.set_ylabel("mean topology size")
    ax.legend(frameon=False, fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def fig_bench(aggregates: list[dict], path: Path) -> Path:
    xs = [row["complexity"] for row in aggregates]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].errorbar(
        xs,
        [row["mean_size"] for row in aggregates],
        yerr=[row["stderr_size"] for row in aggregates],
        marker="o",
        color="#1f5fa8",
    )
    axes[0].set_xlabel("complexity C")
    axes[0].set_ylabel("mean topology size")
    axes[0].grid(alpha=0.3)
    axes[1].plot(xs, [row["mean_vqa"] for row in aggregates], marker="o", label="vqa")
    axes[1].plot(xs, [row["cif_float"] for row in aggregates], marker="s", label="cif")
    axes[1].plot(xs, [row["mean_clip"] for row in aggregates], marker="^", label="clip proxy")
    axes[1].set_xlabel("complexity C")
    axes[1].set_ylabel("score")
    axes[1].set_ylim(0, 1.05)
    axes[1].legend(frameon=False, fontsize=8)
    axes[1].grid(alpha=0.3)
    return _save(fig, path)


def fig_ablation(summary: dict[str, dict], path: Path) -> Path:
    policies = list(summary.keys())
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].bar(policies, [summary[p]["mean_vqa"] for p in policies], color="#1f5fa8")
    axes[0].set_ylabel("mean final vqa")
    axes[0].set_ylim(0, 1.05)
    axes[0].tick_params(axis="x", rotation=30)
    axes[1].bar(policies, [summary[p]["cif_float"] for p in policies], color="#55a868")
    axes[1].set_ylabel("cif")
    axes[1].set_ylim(0, 1.05)
    axes[1].tick_params(axis="x", rotation=30)
    for ax in axes:
        ax.grid(alpha=0.3, axis="y")
    return _save(fig, path)


def fig_scaling_steps(rows: list[dict], path: Path) -> Path:
    by_n: dict[int, list[float]] = {}
    for row in rows:
        by_n.setdefault(row["n"], []).append(float(Fraction(row["best_vqa"])))
    ns = sorted(by_n)
    means = [sum(by_n[n]) / len(by_n[n]) for n in ns]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(ns, means, marker="o", color="#1f5fa8")
    ax.set_xlabel("steps n")
    ax.set_ylabel("mean best vqa by prefix")
    ax.set_ylim(0, 1.05)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def fig_scaling_depth(rows: list[dict], path: Path) -> Path:
    depths = [row["depth"] for row in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(depths, [row["mean_vqa"] for row in rows], marker="o", label="mean vqa")
    ax.plot(depths, [row["mean_clip"] for row in rows], marker="s", label="mean clip proxy")
    ax.set_xlabel("depth")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.05)
    ax.legend(frameon=False, fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, path)
