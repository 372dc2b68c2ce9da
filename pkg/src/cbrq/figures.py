"""Matplotlib renderings of the report data, written straight to files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .backtest import BacktestResult
from .casebase import CaseBase, QueryCase
from .prediction import ErrorReport, HistogramReport, Neighbor, WeightSweepReport

DPI = 150


def _save(fig: "plt.Figure", path: str | Path) -> None:
    fig.savefig(Path(path), dpi=DPI)
    plt.close(fig)


def save_weight_sweep_figure(report: WeightSweepReport, path: str | Path) -> None:
    ws = [p[0] for p in report.points]
    errs = [p[1] for p in report.points]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(ws, errs, marker="o", color="tab:blue")
    best = report.best_weight()
    ax.axvline(best, color="tab:red", linestyle="--", linewidth=1, label=f"minimum at w={best:g}")
    ax.set_xlabel("hybrid weight w")
    ax.set_ylabel(f"mean relative error of top-{report.k} neighbours")
    ax.set_title("Hybrid weight sweep")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def save_histogram_figure(report: HistogramReport, path: str | Path) -> None:
    edges = np.asarray(report.edges)
    widths = np.diff(edges)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(edges[:-1], report.counts, width=widths, align="edge", color="tab:blue", edgecolor="white")
    ax.set_xlabel(f"{report.variant} score")
    ax.set_ylabel("count")
    ax.set_title(f"Top-{report.k} score distribution ({report.query_count} queries)")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def save_error_report_figure(report: ErrorReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name in report.variants:
        errors = [report.cells[(name, k)].mean_abs_error for k in report.ks]
        ax.plot(report.ks, errors, marker="o", label=name)
    ax.set_xlabel("neighbours k")
    ax.set_ylabel("mean absolute error")
    ax.set_title(f"Prediction error by variant ({report.query_count} queries)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def save_value_paths_figure(results: Mapping[str, BacktestResult], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 5))
    for name, result in results.items():
        labels = [str(result.months[0].shift(-1))] + [str(m) for m in result.months]
        ax.plot(range(len(result.value_path)), result.value_path, label=name)
        ax.set_xticks(
            range(0, len(result.value_path), max(1, len(result.value_path) // 8)),
            labels[:: max(1, len(result.value_path) // 8)],
            rotation=45,
        )
    ax.set_xlabel("month")
    ax.set_ylabel("portfolio value")
    ax.set_title("Accumulated value by similarity variant")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def _growth_path(returns: Sequence[float]) -> np.ndarray:
    return np.concatenate([[1.0], np.cumprod(1.0 + np.asarray(returns, dtype=np.float64))])


def save_neighbor_figure(
    query: QueryCase,
    top: Sequence[Neighbor],
    bottom: Sequence[Neighbor],
    pool: CaseBase,
    path: str | Path,
) -> None:
    """Cumulative growth of the query window next to its retrieval extremes."""
    fig, ax = plt.subplots(figsize=(8, 5))
    xs = range(len(query.description) + 1)
    for n in top:
        case = pool.case(n.asset_id, n.anchor_month)
        ax.plot(xs, _growth_path(case.description), color="tab:blue", marker="o", markersize=3,
                alpha=0.6, label=f"{n.asset_id}@{n.anchor_month} ({n.score:.3f})")
    for n in bottom:
        case = pool.case(n.asset_id, n.anchor_month)
        ax.plot(xs, _growth_path(case.description), color="tab:red", marker="s", markersize=3,
                alpha=0.6, label=f"{n.asset_id}@{n.anchor_month} ({n.score:.3f})")
    ax.plot(xs, _growth_path(query.description), color="black", linewidth=2.2,
            label=f"query {query.asset_id}@{query.anchor_month}")
    ax.set_xlabel("months into window")
    ax.set_ylabel("cumulative growth")
    ax.set_title("Query window vs most and least similar cases")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
