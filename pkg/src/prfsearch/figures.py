"""Figure rendering for the report paths (eval, sweep, bench).

Figures are a presentation layer next to the delimited outputs; nothing
numeric depends on them. matplotlib is imported lazily with the Agg
backend so library use and headless runs never touch a display.
"""

from __future__ import annotations

from typing import Mapping, Sequence


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_eval_figure(report, path) -> None:
    """Aggregate bars plus per-query distributions for each metric."""
    plt = _plt()
    metrics = list(report.metrics)
    means = [report.mean(m) for m in metrics]
    per_metric = [
        [row[m] for row in report.per_query.values()] for m in metrics
    ]
    fig, (ax_bar, ax_box) = plt.subplots(
        1, 2, figsize=(max(7.0, 1.6 * len(metrics)), 3.6)
    )
    positions = range(len(metrics))
    ax_bar.bar(positions, means, color="#3b6ea5")
    ax_bar.set_xticks(list(positions))
    ax_bar.set_xticklabels(metrics, rotation=30, ha="right")
    ax_bar.set_ylabel("mean over queries")
    ax_bar.set_title("aggregate")
    ax_bar.set_ylim(0, 1.05)
    ax_box.boxplot(per_metric, tick_labels=metrics)
    ax_box.tick_params(axis="x", rotation=30)
    ax_box.set_ylabel("per-query value")
    ax_box.set_title(f"distribution ({len(report.per_query)} queries)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_figure(rows: Sequence, path) -> None:
    """Best metric value per k for each configuration family."""
    plt = _plt()
    families: dict[str, dict[int, float]] = {}
    for row in rows:
        best = families.setdefault(row.family, {})
        if row.k not in best or row.value > best[row.k]:
            best[row.k] = row.value
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for name in sorted(families):
        points = sorted(families[name].items())
        ax.plot(
            [k for k, _ in points],
            [v for _, v in points],
            marker="o",
            label=name,
        )
    metric = rows[0].metric if rows else ""
    ax.set_xlabel("feedback depth k")
    ax.set_ylabel(f"best {metric}")
    ax.set_title("sweep: best value per depth")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_sweep_heatmap(rows: Sequence, path) -> None:
    """alpha x beta heatmap at the best-performing k (weighted fusion rows only)."""
    plt = _plt()
    weighted = [r for r in rows if r.alpha is not None and r.beta is not None]
    if not weighted:
        return
    best_k = weighted[0].k  # rows arrive sorted best-first
    grid = {(r.alpha, r.beta): r.value for r in weighted if r.k == best_k}
    alphas = sorted({a for a, _ in grid})
    betas = sorted({b for _, b in grid})
    matrix = [[grid.get((a, b), float("nan")) for b in betas] for a in alphas]
    fig, ax = plt.subplots(figsize=(5.6, 4.6))
    image = ax.imshow(matrix, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(betas)))
    ax.set_xticklabels([f"{b:g}" for b in betas], fontsize=7)
    ax.set_yticks(range(len(alphas)))
    ax.set_yticklabels([f"{a:g}" for a in alphas], fontsize=7)
    ax.set_xlabel("beta")
    ax.set_ylabel("alpha")
    metric = weighted[0].metric
    ax.set_title(f"{metric} at k={best_k}")
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_latency_figure(summaries: Mapping[str, object], path) -> None:
    """Stacked per-stage mean latency bars, one bar per flow."""
    plt = _plt()
    flows = list(summaries)
    stages = ["first_stage", "prf_build", "second_stage"]
    colors = {"first_stage": "#3b6ea5", "prf_build": "#d08a2e", "second_stage": "#7a4fa3"}
    fig, ax = plt.subplots(figsize=(max(5.0, 1.5 * len(flows)), 4.0))
    bottoms = [0.0] * len(flows)
    for stage in stages:
        heights = [summaries[f].stage_means_ms[stage] for f in flows]
        ax.bar(flows, heights, bottom=bottoms, label=stage, color=colors[stage])
        bottoms = [b + h for b, h in zip(bottoms, heights)]
    for i, flow in enumerate(flows):
        ax.text(
            i,
            bottoms[i],
            f" {summaries[flow].mean_ms:.1f} ms/q",
            ha="center",
            va="bottom",
            fontsize=8,
        )
    ax.set_ylabel("mean latency (ms/q)")
    ax.set_title("per-stage query latency")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
