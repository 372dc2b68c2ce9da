"""Retrieval and next-month return prediction.

Queries are scored against the rolling candidate pool of cases anchored
in the months just before them.  The top-k neighbours vote with weights
max(score, 0); the prediction is the weighted mean of their next-month
returns.  Error studies over (variant, k) grids, hybrid weight sweeps
and score histograms all share the same retrieval path.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import similarity
from .casebase import Case, CaseBase, QueryCase, rolling_case_base
from .errors import (
    EmptyCaseBaseError,
    EmptyRetrievalError,
    PredictionError,
    UsageError,
    ValidationError,
)
from .months import Month
from .similarity import SimilarityConfig

logger = logging.getLogger(__name__)

DEFAULT_K = 10
DEFAULT_SWEEP_K = 20
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class Neighbor:
    """One retrieved case: its key, score and next-month return."""

    asset_id: str
    anchor_month: Month
    score: float
    solution: float

    @property
    def key(self) -> tuple[str, Month]:
        return (self.asset_id, self.anchor_month)


@dataclass(frozen=True)
class Prediction:
    query: QueryCase
    predicted_return: float
    k: int
    config: SimilarityConfig
    neighbors: tuple[Neighbor, ...]


def rank_candidates(
    query: QueryCase | Case, base: CaseBase, config: SimilarityConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Score every candidate and return (ordered indices, raw scores).

    Candidates with undefined scores are dropped from the ordering.  Ties
    on score break by earlier anchor month, then ticker; the composite
    key is unique, so the order is total.
    """
    q_ord = query.anchor_month.ordinal()
    if len(base) and int(np.max(base.anchor_ords)) >= q_ord:
        raise ValidationError(
            f"candidate pool for {query.key} contains cases not strictly before the query anchor"
        )
    scores = similarity.score_candidates(query.description, base.candidate_arrays, config)
    valid = np.flatnonzero(~np.isnan(scores))
    if valid.size < len(base):
        logger.debug(
            "query %s@%s: %d of %d candidates skipped (undefined %s score)",
            query.asset_id,
            query.anchor_month,
            len(base) - valid.size,
            len(base),
            config.variant,
        )
    ordered = valid[
        np.lexsort((base.asset_ranks[valid], base.anchor_ords[valid], -scores[valid]))
    ]
    return ordered, scores


def _neighbors_at(base: CaseBase, scores: np.ndarray, indices: np.ndarray) -> tuple[Neighbor, ...]:
    return tuple(
        Neighbor(
            asset_id=base.cases[i].asset_id,
            anchor_month=base.cases[i].anchor_month,
            score=float(scores[i]),
            solution=float(base.solutions[i]),
        )
        for i in indices
    )


def retrieve_top_k(
    query: QueryCase | Case, base: CaseBase, config: SimilarityConfig, k: int
) -> list[Neighbor]:
    """The k best-scoring candidates, fewer if the pool is smaller."""
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if len(base) == 0:
        raise EmptyRetrievalError(f"no candidates to retrieve for {query.key}")
    ordered, scores = rank_candidates(query, base, config)
    return list(_neighbors_at(base, scores, ordered[:k]))


def retrieve_extremes(
    query: QueryCase | Case, base: CaseBase, config: SimilarityConfig, k: int
) -> tuple[list[Neighbor], list[Neighbor]]:
    """The k most similar cases and the k least similar, for inspection.

    The least-similar list is presented in ascending score order.  The
    two lists overlap when the pool holds fewer than 2k candidates.
    """
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if len(base) == 0:
        raise EmptyRetrievalError(f"no candidates to retrieve for {query.key}")
    ordered, scores = rank_candidates(query, base, config)
    top = list(_neighbors_at(base, scores, ordered[:k]))
    bottom = list(_neighbors_at(base, scores, ordered[max(ordered.size - k, 0) :][::-1]))
    return top, bottom


def similarity_weighted_mean(scores: Sequence[float], solutions: Sequence[float]) -> float:
    """Weighted mean of solutions with weights max(score, 0).

    Falls back to the plain mean when every weight is zero, so a
    prediction is always defined for a non-empty neighbour list.
    """
    if len(scores) != len(solutions):
        raise ValidationError("scores and solutions differ in length")
    if not scores:
        raise PredictionError("cannot average an empty neighbour list")
    weights = [s if s > 0.0 else 0.0 for s in scores]
    total = sum(weights)
    if total > 0.0:
        return sum(w * r for w, r in zip(weights, solutions)) / total
    return sum(solutions) / len(solutions)


def predict_return(
    query: QueryCase | Case, base: CaseBase, config: SimilarityConfig, k: int
) -> Prediction:
    """Predict the query's next-month return from its top-k neighbours."""
    neighbors = retrieve_top_k(query, base, config, k)
    if not neighbors:
        raise PredictionError(
            f"no candidate has a defined {config.variant} score for {query.key}"
        )
    value = similarity_weighted_mean(
        [n.score for n in neighbors], [n.solution for n in neighbors]
    )
    query_case = query if isinstance(query, QueryCase) else QueryCase.from_case(query)
    return Prediction(
        query=query_case,
        predicted_return=value,
        k=k,
        config=config,
        neighbors=tuple(neighbors),
    )


def select_queries(
    full: CaseBase, horizon: int, include_warmup: bool = False
) -> list[QueryCase]:
    """Cases eligible as queries, ordered by (anchor month, ticker).

    By default only fully warmed queries are returned: those with at
    least horizon earlier anchor months on the timeline.  With
    include_warmup, anything with at least one earlier anchor month
    qualifies.
    """
    if horizon < 1:
        raise UsageError(f"horizon must be >= 1, got {horizon}")
    timeline = full.anchor_months
    first_eligible = 1 if include_warmup else horizon
    eligible = set(timeline[first_eligible:])
    queries = [QueryCase.from_case(c) for c in full.cases if c.anchor_month in eligible]
    queries.sort(key=lambda q: (q.anchor_month, q.asset_id))
    return queries


def _group_by_anchor(queries: Iterable[QueryCase]) -> list[tuple[Month, list[QueryCase]]]:
    grouped: dict[Month, list[QueryCase]] = {}
    for q in queries:
        grouped.setdefault(q.anchor_month, []).append(q)
    return [(m, grouped[m]) for m in sorted(grouped)]


@dataclass(frozen=True)
class SkipRecord:
    asset_id: str
    anchor_month: Month
    reason: str


@dataclass(frozen=True)
class ErrorCell:
    mean_abs_error: float
    query_count: int


@dataclass(frozen=True)
class ErrorReport:
    """Mean absolute prediction error over a (variant, k) grid.

    Every cell is computed over the same query set: a query that cannot
    be scored under any requested variant is excluded everywhere and
    listed in skipped.
    """

    variants: tuple[str, ...]
    ks: tuple[int, ...]
    cells: dict[tuple[str, int], ErrorCell]
    skipped: tuple[SkipRecord, ...]
    query_count: int


def evaluate_errors(
    queries: Sequence[QueryCase],
    full: CaseBase,
    variants: Sequence[SimilarityConfig],
    ks: Sequence[int],
    horizon: int,
) -> ErrorReport:
    """Fill the (variant, k) error grid over a shared query population."""
    if not variants:
        raise UsageError("at least one similarity variant is required")
    names = [c.variant.value for c in variants]
    if len(set(names)) != len(names):
        raise UsageError(f"duplicate similarity variants in {names}")
    if not ks:
        raise UsageError("at least one k is required")
    for k in ks:
        if k < 1:
            raise UsageError(f"k must be >= 1, got {k}")
    for q in queries:
        if q.solution is None:
            raise UsageError(f"query {q.key} has no recorded actual return")

    errors: dict[tuple[str, int], list[float]] = {(n, k): [] for n in names for k in ks}
    skipped: list[SkipRecord] = []
    kept = 0
    for month, month_queries in _group_by_anchor(queries):
        try:
            pool = rolling_case_base(month_queries[0], full, horizon)
        except EmptyCaseBaseError as exc:
            skipped.extend(SkipRecord(q.asset_id, q.anchor_month, str(exc)) for q in month_queries)
            continue
        for query in month_queries:
            staged: list[tuple[tuple[str, int], float]] = []
            failure: str | None = None
            for config, name in zip(variants, names):
                ordered, scores = rank_candidates(query, pool, config)
                if ordered.size == 0:
                    failure = f"no defined {name} score against any candidate"
                    break
                for k in ks:
                    top = ordered[:k]
                    predicted = similarity_weighted_mean(
                        [float(scores[i]) for i in top],
                        [float(pool.solutions[i]) for i in top],
                    )
                    staged.append(((name, k), abs(predicted - query.solution)))
            if failure is not None:
                skipped.append(SkipRecord(query.asset_id, query.anchor_month, failure))
                continue
            kept += 1
            for cell_key, err in staged:
                errors[cell_key].append(err)

    cells = {
        key: ErrorCell(
            mean_abs_error=(sum(errs) / len(errs)) if errs else float("nan"),
            query_count=len(errs),
        )
        for key, errs in errors.items()
    }
    return ErrorReport(
        variants=tuple(names),
        ks=tuple(ks),
        cells=cells,
        skipped=tuple(skipped),
        query_count=kept,
    )


@dataclass(frozen=True)
class WeightSweepReport:
    """Mean relative retrieval error of the hybrid metric per weight."""

    points: tuple[tuple[float, float], ...]
    k: int
    epsilon: float
    query_count: int
    skipped: tuple[SkipRecord, ...]

    def best_weight(self) -> float:
        return min(self.points, key=lambda p: (p[1], p[0]))[0]


def weight_sweep(
    queries: Sequence[QueryCase],
    full: CaseBase,
    w_grid: Sequence[float],
    k: int = DEFAULT_SWEEP_K,
    horizon: int = 6,
    epsilon: float = DEFAULT_EPSILON,
) -> WeightSweepReport:
    """Score the hybrid weight grid by mean relative neighbour error.

    For each query the top-k neighbours under weight w are compared to
    the query's actual next-month return r: the per-neighbour error is
    |r_n - r| / max(|r|, epsilon).  The adjusted correlations and
    cumulative distances are computed once per query and recombined for
    every weight, which matches scoring from scratch bit for bit.
    """
    if not w_grid:
        raise UsageError("weight grid must be non-empty")
    for w in w_grid:
        if not 0.0 <= w <= 1.0:
            raise UsageError(f"weights must lie in [0, 1], got {w}")
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    if not epsilon > 0.0:
        raise UsageError(f"epsilon must be positive, got {epsilon}")
    for q in queries:
        if q.solution is None:
            raise UsageError(f"query {q.key} has no recorded actual return")

    per_w: list[list[float]] = [[] for _ in w_grid]
    skipped: list[SkipRecord] = []
    kept = 0
    for month, month_queries in _group_by_anchor(queries):
        try:
            pool = rolling_case_base(month_queries[0], full, horizon)
        except EmptyCaseBaseError as exc:
            skipped.extend(SkipRecord(q.asset_id, q.anchor_month, str(exc)) for q in month_queries)
            continue
        ranks = pool.asset_ranks
        ords = pool.anchor_ords
        for query in month_queries:
            tau, e = similarity.similarity_components(query.description, pool.candidate_arrays)
            valid = np.flatnonzero(~np.isnan(tau))
            if valid.size == 0:
                skipped.append(
                    SkipRecord(query.asset_id, query.anchor_month, "no defined hybrid score")
                )
                continue
            kept += 1
            denom = max(abs(query.solution), epsilon)
            for wi, w in enumerate(w_grid):
                scores = similarity.hybrid_scores(tau, e, w)
                ordered = valid[np.lexsort((ranks[valid], ords[valid], -scores[valid]))]
                top = ordered[:k]
                errs = np.abs(pool.solutions[top] - query.solution) / denom
                per_w[wi].append(float(np.sum(errs)) / top.size)

    points = tuple(
        (float(w), (sum(errs) / len(errs)) if errs else float("nan"))
        for w, errs in zip(w_grid, per_w)
    )
    return WeightSweepReport(
        points=points, k=k, epsilon=epsilon, query_count=kept, skipped=tuple(skipped)
    )


@dataclass(frozen=True)
class HistogramReport:
    """Distribution of top-k scores across a query population."""

    variant: str
    k: int
    edges: tuple[float, ...]
    counts: tuple[int, ...]
    query_count: int


def similarity_histogram(
    queries: Sequence[QueryCase],
    full: CaseBase,
    config: SimilarityConfig,
    k: int,
    bins: int,
    horizon: int,
) -> HistogramReport:
    """Histogram of retrieved top-k scores, binned over the variant's range."""
    if bins < 1:
        raise UsageError(f"bins must be >= 1, got {bins}")
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    values: list[float] = []
    kept = 0
    for month, month_queries in _group_by_anchor(queries):
        try:
            pool = rolling_case_base(month_queries[0], full, horizon)
        except EmptyCaseBaseError:
            continue
        for query in month_queries:
            ordered, scores = rank_candidates(query, pool, config)
            if ordered.size == 0:
                continue
            kept += 1
            values.extend(float(scores[i]) for i in ordered[:k])
    lo, hi = similarity.score_range(config)
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=(lo, hi))
    return HistogramReport(
        variant=config.variant.value,
        k=k,
        edges=tuple(float(v) for v in edges),
        counts=tuple(int(v) for v in counts),
        query_count=kept,
    )


@dataclass(frozen=True)
class PredictionRow:
    asset_id: str
    predicted: float
    actual: float


def build_prediction_table(
    full: CaseBase,
    config: SimilarityConfig,
    k: int,
    horizon: int,
    include_warmup: bool = False,
    start: Month | None = None,
    end: Month | None = None,
) -> dict[Month, list[PredictionRow]]:
    """Predicted and actual returns per traded month for every asset.

    Keys are the months being traded (query anchor + 1), restricted to
    [start, end] when given.  Assets whose query cannot be scored in a
    month are left out of that month's rows.
    """
    queries = select_queries(full, horizon, include_warmup)
    table: dict[Month, list[PredictionRow]] = {}
    for month, month_queries in _group_by_anchor(queries):
        traded = month.shift(1)
        if start is not None and traded < start:
            continue
        if end is not None and traded > end:
            continue
        try:
            pool = rolling_case_base(month_queries[0], full, horizon)
        except EmptyCaseBaseError:
            continue
        rows: list[PredictionRow] = []
        for query in month_queries:
            ordered, scores = rank_candidates(query, pool, config)
            if ordered.size == 0:
                logger.debug("no defined %s score for %s@%s", config.variant, query.asset_id, month)
                continue
            top = ordered[:k]
            predicted = similarity_weighted_mean(
                [float(scores[i]) for i in top],
                [float(pool.solutions[i]) for i in top],
            )
            rows.append(
                PredictionRow(asset_id=query.asset_id, predicted=predicted, actual=query.solution)
            )
        if rows:
            table[traded] = rows
    return table


def write_error_report_csv(report: ErrorReport, path: str | Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["variant", "k", "mean_abs_error", "query_count"])
        for name in report.variants:
            for k in report.ks:
                cell = report.cells[(name, k)]
                writer.writerow([name, k, repr(cell.mean_abs_error), cell.query_count])


def write_skip_report_csv(skipped: Sequence[SkipRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["ticker", "year", "month", "reason"])
        for record in skipped:
            writer.writerow(
                [record.asset_id, record.anchor_month.year, record.anchor_month.month, record.reason]
            )


def write_weight_sweep_csv(report: WeightSweepReport, path: str | Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["w", "mean_error"])
        for w, err in report.points:
            writer.writerow([repr(w), repr(err)])


def write_histogram_csv(report: HistogramReport, path: str | Path) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "count"])
        for i, count in enumerate(report.counts):
            writer.writerow([repr(report.edges[i]), repr(report.edges[i + 1]), count])


def format_error_table(report: ErrorReport) -> str:
    """Readable variant-by-k table of mean absolute errors."""
    width = max(len("variant"), *(len(v) for v in report.variants)) if report.variants else 7
    header = "variant".ljust(width) + "".join(f"  k={k:<8d}" for k in report.ks)
    lines = [header]
    for name in report.variants:
        row = name.ljust(width)
        for k in report.ks:
            row += f"  {report.cells[(name, k)].mean_abs_error:<10.4f}"
        lines.append(row.rstrip())
    lines.append(f"queries: {report.query_count}  skipped: {len(report.skipped)}")
    return "\n".join(lines)
