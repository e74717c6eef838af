"""Figure rendering for detection reports, sweeps, and training traces.

All figures are written straight to files (Agg backend); nothing is shown
interactively. Corrupt cohorts are drawn red, clean cohorts green, matching
the usual convention for these plots.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

CORRUPT_COLOR = "#c44e52"
CLEAN_COLOR = "#55a868"


def detection_summary(report: dict, path):
    """Per-seed detection metrics with aggregate means."""
    per_seed = report["per_seed"]
    seeds = [str(r["seed"]) for r in per_seed]
    metrics = ["f1", "balanced_accuracy", "precision", "recall"]
    x = np.arange(len(seeds))
    width = 0.2

    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(seeds)), 4))
    for i, m in enumerate(metrics):
        vals = [r[m] for r in per_seed]
        ax.bar(x + (i - 1.5) * width, vals, width, label=m.replace("_", " "))
    agg = report["aggregate"]["f1"]["mean"]
    if agg is not None:
        ax.axhline(agg, color="k", linestyle="--", linewidth=1, label=f"mean F1 = {agg:.3f}")
    ax.set_xticks(x)
    ax.set_xticklabels(seeds)
    ax.set_xlabel("seed")
    ax.set_ylabel("score")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8, ncol=2)
    ax.set_title("Detection quality per seed")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def sweep_heatmap(rows: list[dict], path):
    """Mean F1 over seeds as a (param value x eta) heatmap."""
    if not rows:
        return
    param = rows[0]["param_name"]
    values = sorted({r["param_value"] for r in rows})
    etas = sorted({r["eta"] for r in rows})
    grid = np.full((len(values), len(etas)), np.nan)
    for i, v in enumerate(values):
        for j, e in enumerate(etas):
            f1s = [r["f1"] for r in rows if r["param_value"] == v and r["eta"] == e]
            if f1s:
                grid[i, j] = float(np.mean(f1s))

    fig, ax = plt.subplots(figsize=(1.2 * len(etas) + 3, 0.5 * len(values) + 2))
    im = ax.imshow(grid, aspect="auto", cmap="viridis", origin="lower")
    ax.set_xticks(range(len(etas)))
    ax.set_xticklabels([f"{e:g}" for e in etas])
    ax.set_yticks(range(len(values)))
    ax.set_yticklabels([f"{v:g}" for v in values])
    ax.set_xlabel("corruption rate")
    ax.set_ylabel(param)
    top = np.nanmax(grid) if np.isfinite(grid).any() else 1.0
    for i in range(len(values)):
        for j in range(len(etas)):
            if np.isfinite(grid[i, j]):
                ax.text(j, i, f"{grid[i, j]:.3f}", ha="center", va="center", fontsize=7,
                        color="w" if grid[i, j] < top * 0.85 else "k")
    fig.colorbar(im, ax=ax, label="mean F1")
    ax.set_title(f"Detection F1 over {param} grid")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _cohort_boxes(ax, records, statistic):
    epochs = sorted({r["epoch"] for r in records})
    for cohort, color, offset in (("clean", CLEAN_COLOR, -0.17), ("corrupt", CORRUPT_COLOR, 0.17)):
        stats = []
        for e in epochs:
            rec = next(
                r for r in records if r["epoch"] == e and r["cohort"] == cohort and r["statistic"] == statistic
            )
            stats.append(
                {
                    "med": rec["median"],
                    "q1": rec["q1"],
                    "q3": rec["q3"],
                    "whislo": rec["whisker_lo"],
                    "whishi": rec["whisker_hi"],
                    "fliers": [],
                }
            )
        if all(np.isnan(s["med"]) for s in stats):
            continue
        bxp = ax.bxp(
            stats,
            positions=[e + offset for e in epochs],
            widths=0.3,
            showfliers=False,
            patch_artist=True,
        )
        for box in bxp["boxes"]:
            box.set(facecolor=color, alpha=0.6)
        for med in bxp["medians"]:
            med.set(color="k")
    ax.set_xticks(epochs)
    ax.set_xticklabels([str(e) for e in epochs])
    ax.set_xlabel("epoch")


def trace_cohorts(records: list[dict], path):
    """Per-epoch distributions of p on the observed label (top) and its loss gradient (bottom)."""
    statistics = sorted({r["statistic"] for r in records})
    wanted = [s for s in ("p_label", "grad_p") if s in statistics]
    if not wanted:
        wanted = statistics
    fig, axes = plt.subplots(len(wanted), 1, figsize=(8, 3.2 * len(wanted)), squeeze=False)
    labels = {"p_label": "p(observed label)", "grad_p": "dL/dp", "margin": "logit margin"}
    for ax, stat in zip(axes[:, 0], wanted):
        _cohort_boxes(ax, records, stat)
        ax.set_ylabel(labels.get(stat, stat))
    handles = [
        plt.Rectangle((0, 0), 1, 1, facecolor=CLEAN_COLOR, alpha=0.6, label="clean"),
        plt.Rectangle((0, 0), 1, 1, facecolor=CORRUPT_COLOR, alpha=0.6, label="corrupt"),
    ]
    axes[0, 0].legend(handles=handles, fontsize=8, loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def aum_distributions(values, corrupted_mask, include, threshold, path):
    """Histogram of a per-sample statistic split corrupt vs clean, with cohort means."""
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(corrupted_mask, dtype=bool)
    keep = np.asarray(include, dtype=bool)
    corrupt = values[keep & mask]
    clean = values[keep & ~mask]
    fig, ax = plt.subplots(figsize=(7, 4))
    bins = np.histogram_bin_edges(values[keep], bins=50)
    ax.hist(clean, bins=bins, color=CLEAN_COLOR, alpha=0.6, label="clean")
    ax.hist(corrupt, bins=bins, color=CORRUPT_COLOR, alpha=0.6, label="corrupt")
    if clean.size:
        ax.axvline(clean.mean(), color=CLEAN_COLOR, linestyle="--", linewidth=1.2)
    if corrupt.size:
        ax.axvline(corrupt.mean(), color=CORRUPT_COLOR, linestyle="--", linewidth=1.2)
    if threshold is not None:
        ax.axvline(threshold, color="k", linestyle=":", linewidth=1.2, label=f"threshold = {threshold:.3f}")
    ax.set_xlabel("area under margin")
    ax.set_ylabel("samples")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
