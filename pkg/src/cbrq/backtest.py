"""Compounding trading simulation and asset-dropout bootstrap.

Each traded month the top-n assets by predicted return are held
equal-weighted; the realised portfolio return compounds a single value
path.  The bootstrap repeats the whole pipeline on random subsets of the
asset universe with per-run seeds derived from one master seed, so any
run can be reproduced in isolation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .casebase import DEFAULT_HORIZON, DEFAULT_WINDOW, build_case_base
from .errors import InsufficientDataError, UsageError, ValidationError
from .market_data import ReturnSeries
from .months import Month
from .prediction import DEFAULT_K, PredictionRow, build_prediction_table
from .similarity import SimilarityConfig

DEFAULT_TOP_N = 5
DEFAULT_INITIAL_CAPITAL = 1000.0
DEFAULT_RUNS = 100
DEFAULT_DROP_FRACTION = 0.2

MONTHS_PER_YEAR = 12


@dataclass(frozen=True)
class BacktestConfig:
    """Portfolio rules for the simulation.

    cost_bps is a flat per-month deduction in basis points, a hook for
    modelling transaction costs; it defaults to zero.  When a month
    offers fewer predictions than top_n the simulation fails unless
    invest_when_undersized allows holding just the available assets.
    """

    top_n: int = DEFAULT_TOP_N
    initial_capital: float = DEFAULT_INITIAL_CAPITAL
    cost_bps: float = 0.0
    invest_when_undersized: bool = False

    def __post_init__(self) -> None:
        if self.top_n < 1:
            raise UsageError(f"top_n must be >= 1, got {self.top_n}")
        if not self.initial_capital > 0.0:
            raise UsageError(f"initial_capital must be positive, got {self.initial_capital}")
        if self.cost_bps < 0.0:
            raise UsageError(f"cost_bps must be >= 0, got {self.cost_bps}")


@dataclass(frozen=True)
class LedgerEntry:
    month: Month
    asset_id: str
    predicted: float
    actual: float
    weight: float


@dataclass(frozen=True)
class BacktestResult:
    variant: str
    months: tuple[Month, ...]
    monthly_returns: tuple[float, ...]
    value_path: tuple[float, ...]
    accumulated_value: float
    annualised_return: float
    annualised_volatility: float
    trade_count: int
    ledger: tuple[LedgerEntry, ...]


def annualised_return(value_path: Sequence[float], months: int) -> float:
    """Geometric annualisation: (V_end / V_start) ** (12 / months) - 1."""
    if months < 1:
        raise UsageError(f"months must be >= 1, got {months}")
    if len(value_path) < 2:
        raise ValidationError("value path needs at least a start and an end value")
    for v in value_path:
        if not v > 0.0:
            raise ValidationError(f"value path contains non-positive value {v}")
    return (value_path[-1] / value_path[0]) ** (MONTHS_PER_YEAR / months) - 1.0


def annualised_volatility(monthly_returns: Sequence[float]) -> float:
    """Sample standard deviation of monthly returns scaled by sqrt(12)."""
    if len(monthly_returns) < 2:
        raise InsufficientDataError(
            f"volatility needs at least 2 monthly returns, got {len(monthly_returns)}"
        )
    std = float(np.std(np.asarray(monthly_returns, dtype=np.float64), ddof=1))
    return std * math.sqrt(MONTHS_PER_YEAR)


def run_backtest(
    predictions_by_month: Mapping[Month, Sequence[PredictionRow]],
    config: BacktestConfig,
    variant: str = "",
) -> BacktestResult:
    """Simulate the equal-weighted top-n strategy month by month.

    Months are traded in chronological order.  Ties in predicted return
    break alphabetically by ticker.  The value path has one entry per
    traded month plus the starting value.
    """
    months = sorted(predictions_by_month)
    if not months:
        raise InsufficientDataError("no months to trade")
    value = config.initial_capital
    value_path = [value]
    monthly_returns: list[float] = []
    ledger: list[LedgerEntry] = []
    trade_count = 0
    monthly_cost = config.cost_bps / 10000.0
    for month in months:
        rows = list(predictions_by_month[month])
        if not rows:
            raise ValidationError(f"no predictions for traded month {month}")
        if len(rows) < config.top_n and not config.invest_when_undersized:
            raise ValidationError(
                f"month {month} offers {len(rows)} predictions, fewer than top_n={config.top_n}"
            )
        rows.sort(key=lambda r: (-r.predicted, r.asset_id))
        selected = rows[: config.top_n]
        weight = 1.0 / len(selected)
        gross = sum(r.actual for r in selected) / len(selected)
        net = gross - monthly_cost
        if not net > -1.0:
            raise ValidationError(f"month {month}: portfolio return {net} wipes out the portfolio")
        for r in selected:
            ledger.append(
                LedgerEntry(
                    month=month,
                    asset_id=r.asset_id,
                    predicted=r.predicted,
                    actual=r.actual,
                    weight=weight,
                )
            )
        trade_count += len(selected)
        monthly_returns.append(net)
        value = value * (1.0 + net)
        value_path.append(value)

    volatility = (
        annualised_volatility(monthly_returns) if len(monthly_returns) >= 2 else float("nan")
    )
    return BacktestResult(
        variant=variant,
        months=tuple(months),
        monthly_returns=tuple(monthly_returns),
        value_path=tuple(value_path),
        accumulated_value=value_path[-1],
        annualised_return=annualised_return(value_path, len(months)),
        annualised_volatility=volatility,
        trade_count=trade_count,
        ledger=tuple(ledger),
    )


def run_pipeline(
    universe: Sequence[ReturnSeries],
    variants: Sequence[SimilarityConfig],
    *,
    window: int = DEFAULT_WINDOW,
    horizon: int = DEFAULT_HORIZON,
    k: int = DEFAULT_K,
    backtest_config: BacktestConfig | None = None,
    include_warmup: bool = False,
    start: Month | None = None,
    end: Month | None = None,
) -> dict[str, BacktestResult]:
    """Case base, predictions and simulation for each variant in turn.

    The case base is built once and shared across variants, so results
    differ only through the similarity scoring.
    """
    if not universe:
        raise UsageError("universe must contain at least one return series")
    if not variants:
        raise UsageError("at least one similarity variant is required")
    bt_config = backtest_config if backtest_config is not None else BacktestConfig()
    base = build_case_base(universe, window)
    results: dict[str, BacktestResult] = {}
    for config in variants:
        table = build_prediction_table(
            base, config, k, horizon, include_warmup=include_warmup, start=start, end=end
        )
        results[config.variant.value] = run_backtest(table, bt_config, variant=config.variant.value)
    return results


def derive_run_seed(master_seed: int, run_index: int) -> int:
    """Stable per-run seed: leading 8 bytes of sha256("master:index")."""
    digest = hashlib.sha256(f"{master_seed}:{run_index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big")


def sample_survivors(asset_ids: Sequence[str], drop_fraction: float, seed: int) -> list[str]:
    """Drop floor(drop_fraction * A) assets chosen by the seeded permutation.

    Selection works on the sorted ticker list, so the draw depends only
    on the universe's membership and the seed.
    """
    if not 0.0 <= drop_fraction < 1.0:
        raise UsageError(f"drop_fraction must lie in [0, 1), got {drop_fraction}")
    ordered = sorted(asset_ids)
    n_drop = math.floor(drop_fraction * len(ordered))
    rng = np.random.default_rng(seed)
    dropped = {int(i) for i in rng.permutation(len(ordered))[:n_drop]}
    return [a for i, a in enumerate(ordered) if i not in dropped]


@dataclass(frozen=True)
class BootstrapVariantStats:
    accumulated_values: tuple[float, ...]
    annualised_returns: tuple[float, ...]
    annualised_volatilities: tuple[float, ...]
    mean_accumulated_value: float = field(init=False)
    std_accumulated_value: float = field(init=False)
    mean_annualised_return: float = field(init=False)
    std_annualised_return: float = field(init=False)
    mean_annualised_volatility: float = field(init=False)
    std_annualised_volatility: float = field(init=False)

    def __post_init__(self) -> None:
        pairs = (
            ("accumulated_value", self.accumulated_values),
            ("annualised_return", self.annualised_returns),
            ("annualised_volatility", self.annualised_volatilities),
        )
        for name, values in pairs:
            mean = sum(values) / len(values)
            std = (
                float(np.std(np.asarray(values, dtype=np.float64), ddof=1))
                if len(values) >= 2
                else 0.0
            )
            object.__setattr__(self, "mean_" + name, mean)
            object.__setattr__(self, "std_" + name, std)


@dataclass(frozen=True)
class BootstrapSummary:
    """Per-run results of the dropout bootstrap plus audit metadata."""

    runs: int
    drop_fraction: float
    master_seed: int
    run_seeds: tuple[int, ...]
    survivors: tuple[tuple[str, ...], ...]
    variants: tuple[str, ...]
    stats: dict[str, BootstrapVariantStats]
    results_by_run: tuple[dict[str, BacktestResult], ...]


def _bootstrap_task(args: tuple) -> dict[str, BacktestResult]:
    (universe, survivors, variants, window, horizon, k, bt_config, include_warmup, start, end) = args
    subset = [series for series in universe if series.asset_id in survivors]
    return run_pipeline(
        subset,
        variants,
        window=window,
        horizon=horizon,
        k=k,
        backtest_config=bt_config,
        include_warmup=include_warmup,
        start=start,
        end=end,
    )


def bootstrap_backtest(
    universe: Sequence[ReturnSeries],
    variants: Sequence[SimilarityConfig],
    *,
    runs: int = DEFAULT_RUNS,
    drop_fraction: float = DEFAULT_DROP_FRACTION,
    master_seed: int = 0,
    jobs: int = 1,
    window: int = DEFAULT_WINDOW,
    horizon: int = DEFAULT_HORIZON,
    k: int = DEFAULT_K,
    backtest_config: BacktestConfig | None = None,
    include_warmup: bool = False,
    start: Month | None = None,
    end: Month | None = None,
) -> BootstrapSummary:
    """Repeat the pipeline on seeded random subsets of the universe.

    Every run drops the same fraction of assets, drawn from the seed
    sha256(master_seed:run_index), and all variants within a run share
    the same subset.  Results are aggregated in run order, so the
    summary does not depend on the number of worker processes.
    """
    if runs < 1:
        raise UsageError(f"runs must be >= 1, got {runs}")
    if jobs < 1:
        raise UsageError(f"jobs must be >= 1, got {jobs}")
    bt_config = backtest_config if backtest_config is not None else BacktestConfig()
    tickers = sorted({s.asset_id for s in universe})
    if len(tickers) != len(universe):
        raise UsageError("universe contains duplicate tickers")
    n_drop = math.floor(drop_fraction * len(tickers))
    if not 0.0 <= drop_fraction < 1.0:
        raise UsageError(f"drop_fraction must lie in [0, 1), got {drop_fraction}")
    if len(tickers) - n_drop < bt_config.top_n:
        raise UsageError(
            f"dropping {n_drop} of {len(tickers)} assets leaves fewer than top_n={bt_config.top_n}"
        )

    run_seeds = tuple(derive_run_seed(master_seed, i) for i in range(runs))
    survivors = tuple(
        tuple(sample_survivors(tickers, drop_fraction, seed)) for seed in run_seeds
    )
    tasks = [
        (
            tuple(universe),
            frozenset(names),
            tuple(variants),
            window,
            horizon,
            k,
            bt_config,
            include_warmup,
            start,
            end,
        )
        for names in survivors
    ]
    if jobs == 1 or runs == 1:
        results = [_bootstrap_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bootstrap_task, tasks))

    names = tuple(c.variant.value for c in variants)
    stats = {
        name: BootstrapVariantStats(
            accumulated_values=tuple(r[name].accumulated_value for r in results),
            annualised_returns=tuple(r[name].annualised_return for r in results),
            annualised_volatilities=tuple(r[name].annualised_volatility for r in results),
        )
        for name in names
    }
    return BootstrapSummary(
        runs=runs,
        drop_fraction=drop_fraction,
        master_seed=master_seed,
        run_seeds=run_seeds,
        survivors=survivors,
        variants=names,
        stats=stats,
        results_by_run=tuple(results),
    )


def write_ledger_csv(result: BacktestResult, path: str | Path) -> None:
    """month,asset,predicted,actual,weight rows for one simulation."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["month", "asset", "predicted", "actual", "weight"])
        for entry in result.ledger:
            writer.writerow(
                [str(entry.month), entry.asset_id, repr(entry.predicted), repr(entry.actual), repr(entry.weight)]
            )


def write_bootstrap_summary_csv(summary: BootstrapSummary, path: str | Path) -> None:
    """One row per (variant, run) with the headline statistics."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["variant", "run", "accumulated_value", "annualised_return", "annualised_volatility"])
        for name in summary.variants:
            stats = summary.stats[name]
            for run in range(summary.runs):
                writer.writerow(
                    [
                        name,
                        run,
                        repr(stats.accumulated_values[run]),
                        repr(stats.annualised_returns[run]),
                        repr(stats.annualised_volatilities[run]),
                    ]
                )


def write_variant_table_csv(
    canonical: Mapping[str, BacktestResult],
    summary: BootstrapSummary | None,
    path: str | Path,
) -> None:
    """Headline table: one row per variant, full-universe plus bootstrap stats."""
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        header = ["variant", "accumulated_value", "annualised_return", "annualised_volatility"]
        if summary is not None:
            header += [
                "bootstrap_mean_accumulated_value",
                "bootstrap_std_accumulated_value",
                "bootstrap_mean_annualised_return",
                "bootstrap_std_annualised_return",
                "bootstrap_runs",
            ]
        writer.writerow(header)
        for name, result in canonical.items():
            row = [
                name,
                repr(result.accumulated_value),
                repr(result.annualised_return),
                repr(result.annualised_volatility),
            ]
            if summary is not None:
                stats = summary.stats[name]
                row += [
                    repr(stats.mean_accumulated_value),
                    repr(stats.std_accumulated_value),
                    repr(stats.mean_annualised_return),
                    repr(stats.std_annualised_return),
                    summary.runs,
                ]
            writer.writerow(row)


def write_bootstrap_summary_json(
    summary: BootstrapSummary, path: str | Path, config: dict | None = None
) -> None:
    """Audit record: seeds, survivor sets and per-variant statistics."""
    payload = {
        "runs": summary.runs,
        "drop_fraction": summary.drop_fraction,
        "master_seed": summary.master_seed,
        "run_seeds": list(summary.run_seeds),
        "survivors_per_run": [list(names) for names in summary.survivors],
        "variants": {
            name: {
                "accumulated_values": list(stats.accumulated_values),
                "annualised_returns": list(stats.annualised_returns),
                "annualised_volatilities": list(stats.annualised_volatilities),
                "mean_accumulated_value": stats.mean_accumulated_value,
                "std_accumulated_value": stats.std_accumulated_value,
                "mean_annualised_return": stats.mean_annualised_return,
                "std_annualised_return": stats.std_annualised_return,
                "mean_annualised_volatility": stats.mean_annualised_volatility,
                "std_annualised_volatility": stats.std_annualised_volatility,
            }
            for name, stats in summary.stats.items()
        },
    }
    if config is not None:
        payload["config"] = config
    with Path(path).open("w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
