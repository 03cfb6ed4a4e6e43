"""Figure rendering for run and comparison reports.

Kept separate from metrics on purpose: reports stay machine-readable, and
only this layer (used by the CLI) turns them into PNG files.  The Agg
backend is forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .metrics import ALL, ComparisonReport, MetricsReport

_RUN_PANELS = (
    ("successRatio", "success_ratio", "committed share"),
    ("meanLatencySec", "mean_latency_sec", "seconds"),
)

_COMPARE_COLUMNS = (
    ("tps", "tps", "tx/s"),
    ("successfulTps", "successful_tps", "tx/s"),
    ("successRatio", "success_ratio", "committed share"),
    ("meanLatencySec", "mean_latency_sec", "seconds"),
)


def render_run_figure(report: MetricsReport, out_path: Path) -> Path:
    """One summary image per run: per-type success ratio and mean latency."""
    rows = [r for r in report.ordered_rows() if r.tx_type != ALL]
    if not rows:
        rows = [report.overall]
    labels = [r.tx_type for r in rows]
    fig, axes = plt.subplots(1, len(_RUN_PANELS), figsize=(6 * len(_RUN_PANELS), 4))
    for ax, (title, attr, ylabel) in zip(axes, _RUN_PANELS):
        ax.bar(labels, [getattr(r, attr) for r in rows], color="#4878a8")
        ax.set_title(f"{report.strategy}: {title}")
        ax.set_ylabel(ylabel)
        ax.tick_params(axis="x", rotation=45)
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def render_share_timeline(buckets: list[tuple[int, float]], strategy: str,
                          out_path: Path) -> Path:
    """Per-second committed share among included transactions."""
    fig, ax = plt.subplots(figsize=(8, 3.5))
    if buckets:
        ax.plot([b for b, _ in buckets], [s for _, s in buckets],
                marker=".", color="#4878a8")
    ax.set_xlabel("second")
    ax.set_ylabel("committed share")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"{strategy}: per-second committed share")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def render_comparison_figures(comparison: ComparisonReport, out_dir: Path) -> list[Path]:
    """One grouped-bar image per headline metric across strategies."""
    written = []
    for column, attr, ylabel in _COMPARE_COLUMNS:
        fig, ax = plt.subplots(figsize=(7, 4))
        strategies = [rep.strategy for rep in comparison.reports]
        values = [getattr(rep.overall, attr) for rep in comparison.reports]
        ax.bar(strategies, values, color="#4878a8")
        ax.set_title(column)
        ax.set_ylabel(ylabel)
        ax.tick_params(axis="x", rotation=30)
        ax.grid(axis="y", alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"compare_{column}.png"
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)
    return written
