"""Command line interface.

Subcommands mirror the pipeline stages: ingest daily prices, build the
case base, study the hybrid weight and score distribution, fill the
prediction error grid, run the trading simulation with its bootstrap,
and inspect the neighbours of a single query.  Every command writes its
resolved configuration as JSON next to its outputs and exits 0 on
success, 1 on usage errors, 2 on data errors, 3 on internal failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import backtest as bt
from . import casebase as cb
from . import config as cfgmod
from . import market_data as md
from . import prediction as pred
from .errors import CbrqError, DataError, UsageError
from .months import Month
from .similarity import SimilarityConfig, SimilarityVariant

logger = logging.getLogger(__name__)


def _comma_ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _comma_names(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (falls back to $CBRQ_CONFIG)")
    common.add_argument("--output-dir", dest="output_dir", help="directory for outputs")
    common.add_argument("--data-dir", dest="data_dir", help="directory of daily price CSVs")
    common.add_argument("--returns-dir", dest="returns_dir", help="directory of ingested return CSVs")
    common.add_argument("--casebase", dest="casebase", help="case base JSONL path")
    common.add_argument("--seed", dest="master_seed", type=int, help="master seed for the bootstrap")
    common.add_argument("--jobs", dest="jobs", type=int, help="worker processes for the bootstrap")
    common.add_argument("--window", dest="window", type=int, help="description window length in months")
    common.add_argument("--horizon", dest="horizon", type=int, help="rolling candidate horizon in months")
    common.add_argument("--variants", dest="variants", type=_comma_names, help="comma-separated variant names")
    common.add_argument("--weight", dest="weight", type=float, help="hybrid weight w in [0, 1]")
    common.add_argument("--ks", dest="ks", type=_comma_ints, help="comma-separated k grid for the error study")
    common.add_argument("--sweep-k", dest="sweep_k", type=int, help="neighbours per query in sweep and histogram")
    common.add_argument("--weight-grid", dest="weight_grid", type=_comma_floats, help="weights to sweep")
    common.add_argument("--epsilon", dest="epsilon", type=float, help="relative-error floor in the sweep")
    common.add_argument("--bins", dest="bins", type=int, help="histogram bin count")
    common.add_argument("--k", dest="k", type=int, help="neighbours per prediction")
    common.add_argument("--top-n", dest="top_n", type=int, help="portfolio size per month")
    common.add_argument("--capital", dest="initial_capital", type=float, help="starting portfolio value")
    common.add_argument("--cost-bps", dest="cost_bps", type=float, help="flat monthly cost in basis points")
    common.add_argument("--runs", dest="runs", type=int, help="bootstrap repetitions")
    common.add_argument("--drop-fraction", dest="drop_fraction", type=float, help="asset fraction dropped per run")
    common.add_argument("--gap-fill-days", dest="allow_gap_fill_days", type=int,
                        help="forward-fill daily gaps up to this many days")
    common.add_argument("--start", dest="start", help="first traded month, YYYY-MM")
    common.add_argument("--end", dest="end", help="last traded month, YYYY-MM")
    common.add_argument("--include-warmup", dest="include_warmup", action=argparse.BooleanOptionalAction,
                        default=None, help="also query months with a partially filled horizon")
    common.add_argument("--figures", dest="figures", action=argparse.BooleanOptionalAction,
                        default=None, help="render figures next to the CSV outputs")
    common.add_argument("--per-run-ledgers", dest="per_run_ledgers", action=argparse.BooleanOptionalAction,
                        default=None, help="write a trade ledger for every bootstrap run")
    common.add_argument("--invest-when-undersized", dest="invest_when_undersized",
                        action=argparse.BooleanOptionalAction, default=None,
                        help="hold fewer than top-n assets when a month is short")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug")

    parser = argparse.ArgumentParser(
        prog="cbrq",
        description="Case-based monthly stock return prediction and trading simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", parents=[common],
                              help="parse daily price CSVs into monthly return CSVs")
    p_ingest.set_defaults(func=cmd_ingest)

    p_build = sub.add_parser("build", parents=[common],
                             help="build and persist the case base from ingested returns")
    p_build.set_defaults(func=cmd_build)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="sweep the hybrid weight and histogram the scores")
    p_sweep.set_defaults(func=cmd_sweep)

    p_errors = sub.add_parser("errors", parents=[common],
                              help="fill the (variant, k) prediction error grid")
    p_errors.set_defaults(func=cmd_errors)

    p_backtest = sub.add_parser("backtest", parents=[common],
                                help="run the trading simulation and dropout bootstrap")
    p_backtest.set_defaults(func=cmd_backtest)

    p_neighbors = sub.add_parser("neighbors", parents=[common],
                                 help="show the most and least similar cases for one query")
    p_neighbors.add_argument("--asset", required=True, help="query ticker")
    p_neighbors.add_argument("--month", required=True, help="query anchor month, YYYY-MM")
    p_neighbors.add_argument("--variant", help="similarity variant for the query")
    p_neighbors.set_defaults(func=cmd_neighbors)

    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        name: getattr(args, name)
        for name in cfgmod.FIELD_NAMES
        if getattr(args, name, None) is not None
    }


def _ensure_output_dir(config: cfgmod.RunConfig) -> Path:
    out = config.output_path()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_universe(returns_dir: Path) -> list[md.ReturnSeries]:
    if not returns_dir.is_dir():
        raise DataError(f"returns directory not found: {returns_dir} (run 'cbrq ingest' first)")
    files = sorted(returns_dir.glob("*.csv"))
    if not files:
        raise DataError(f"no return CSVs in {returns_dir}")
    return [md.read_returns_csv(path) for path in files]


def cmd_ingest(config: cfgmod.RunConfig, args: argparse.Namespace) -> None:
    if config.data_dir is None:
        raise UsageError("ingest needs --data-dir (or data_dir in the config file)")
    data_dir = Path(config.data_dir)
    if not data_dir.is_dir():
        raise UsageError(f"data directory not found: {data_dir}")
    files = sorted(data_dir.glob("*.csv"))
    if not files:
        raise UsageError(f"no price CSVs in {data_dir}")

    out = _ensure_output_dir(config)
    returns_dir = config.returns_path()
    returns_dir.mkdir(parents=True, exist_ok=True)
    accepted = 0
    rejects: list[tuple[str, str]] = []
    for path in files:
        ticker = path.stem
        try:
            series = md.ingest_price_file(path, allow_gap_fill_days=config.allow_gap_fill_days)
        except DataError as exc:
            logger.info("rejecting %s: %s", ticker, exc)
            rejects.append((ticker, str(exc)))
            continue
        md.write_returns_csv(series, returns_dir / f"{ticker}.csv")
        accepted += 1

    with (out / "rejects.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["ticker", "reason"])
        writer.writerows(rejects)
    cfgmod.write_resolved_config(config, out / "ingest_config.json")
    print(f"ingested {accepted} of {len(files)} assets into {returns_dir} ({len(rejects)} rejected)")


def cmd_build(config: cfgmod.RunConfig, args: argparse.Namespace) -> None:
    universe = _read_universe(config.returns_path())
    base = cb.build_case_base(universe, config.window)
    out = _ensure_output_dir(config)
    destination = config.casebase_path()
    destination.parent.mkdir(parents=True, exist_ok=True)
    cb.save_case_base(base, destination)
    cfgmod.write_resolved_config(config, out / "build_config.json")
    print(f"built {len(base)} cases from {len(universe)} assets into {destination}")


def _load_base_and_queries(config: cfgmod.RunConfig) -> tuple[cb.CaseBase, list[cb.QueryCase]]:
    path = config.casebase_path()
    if not path.is_file():
        raise DataError(f"case base not found: {path} (run 'cbrq build' first)")
    base = cb.load_case_base(path)
    queries = pred.select_queries(base, config.horizon, config.include_warmup)
    return base, queries


def cmd_sweep(config: cfgmod.RunConfig, args: argparse.Namespace) -> None:
    base, queries = _load_base_and_queries(config)
    report = pred.weight_sweep(
        queries, base, config.weight_grid, k=config.sweep_k,
        horizon=config.horizon, epsilon=config.epsilon,
    )
    sim_config = config.variant_configs()[0]
    histogram = pred.similarity_histogram(
        queries, base, sim_config, config.sweep_k, config.bins, config.horizon
    )
    out = _ensure_output_dir(config)
    pred.write_weight_sweep_csv(report, out / "weight_sweep.csv")
    pred.write_histogram_csv(histogram, out / "similarity_histogram.csv")
    cfgmod.write_resolved_config(config, out / "sweep_config.json")
    if config.figures:
        from . import figures

        figures.save_weight_sweep_figure(report, out / "weight_sweep.png")
        figures.save_histogram_figure(histogram, out / "similarity_histogram.png")
    best_w = report.best_weight()
    best_err = dict(report.points)[best_w]
    print(f"swept {len(report.points)} weights over {report.query_count} queries "
          f"(top-{report.k}); minimum mean relative error {best_err:.4f} at w={best_w:g}")
    print(f"histogram: {sum(histogram.counts)} {histogram.variant} scores in {len(histogram.counts)} bins")


def cmd_errors(config: cfgmod.RunConfig, args: argparse.Namespace) -> None:
    base, queries = _load_base_and_queries(config)
    report = pred.evaluate_errors(
        queries, base, config.variant_configs(), config.ks, config.horizon
    )
    out = _ensure_output_dir(config)
    pred.write_error_report_csv(report, out / "errors.csv")
    pred.write_skip_report_csv(report.skipped, out / "skips.csv")
    cfgmod.write_resolved_config(config, out / "errors_config.json")
    if config.figures:
        from . import figures

        figures.save_error_report_figure(report, out / "prediction_errors.png")
    print(pred.format_error_table(report))


def cmd_backtest(config: cfgmod.RunConfig, args: argparse.Namespace) -> None:
    universe = _read_universe(config.returns_path())
    variants = config.variant_configs()
    bt_config = bt.BacktestConfig(
        top_n=config.top_n,
        initial_capital=config.initial_capital,
        cost_bps=config.cost_bps,
        invest_when_undersized=config.invest_when_undersized,
    )
    shared = dict(
        window=config.window,
        horizon=config.horizon,
        k=config.k,
        backtest_config=bt_config,
        include_warmup=config.include_warmup,
        start=config.start_month(),
        end=config.end_month(),
    )
    canonical = bt.run_pipeline(universe, variants, **shared)
    summary = bt.bootstrap_backtest(
        universe, variants,
        runs=config.runs,
        drop_fraction=config.drop_fraction,
        master_seed=config.master_seed,
        jobs=config.jobs,
        **shared,
    )
    out = _ensure_output_dir(config) / "backtest"
    out.mkdir(parents=True, exist_ok=True)
    bt.write_variant_table_csv(canonical, summary, out / "summary_table.csv")
    bt.write_bootstrap_summary_csv(summary, out / "bootstrap_summary.csv")
    bt.write_bootstrap_summary_json(summary, out / "bootstrap_summary.json")
    ledger_dir = out / "ledgers"
    ledger_dir.mkdir(exist_ok=True)
    for name, result in canonical.items():
        bt.write_ledger_csv(result, ledger_dir / f"{name}_full.csv")
    if config.per_run_ledgers:
        for run, results in enumerate(summary.results_by_run):
            for name, result in results.items():
                run_dir = ledger_dir / name
                run_dir.mkdir(exist_ok=True)
                bt.write_ledger_csv(result, run_dir / f"run_{run:04d}.csv")
    cfgmod.write_resolved_config(config, out / "backtest_config.json")
    if config.figures:
        from . import figures

        figures.save_value_paths_figure(canonical, out / "value_paths.png")
    for name in summary.variants:
        result = canonical[name]
        stats = summary.stats[name]
        print(
            f"{name}: value {result.accumulated_value:.2f}, "
            f"annual return {result.annualised_return:.1%}, "
            f"volatility {result.annualised_volatility:.1%} | "
            f"bootstrap return {stats.mean_annualised_return:.1%} "
            f"+/- {stats.std_annualised_return:.1%} over {summary.runs} runs"
        )


def cmd_neighbors(config: cfgmod.RunConfig, args: argparse.Namespace) -> None:
    path = config.casebase_path()
    if not path.is_file():
        raise DataError(f"case base not found: {path} (run 'cbrq build' first)")
    base = cb.load_case_base(path)
    try:
        month = Month.parse(args.month)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    query = base.case(args.asset, month)
    pool = cb.rolling_case_base(query, base, config.horizon)
    if args.variant is not None:
        try:
            sim_config = SimilarityConfig(SimilarityVariant(args.variant), config.weight)
        except ValueError:
            raise UsageError(
                f"unknown variant {args.variant!r}; choose from {[v.value for v in SimilarityVariant]}"
            ) from None
    else:
        sim_config = config.variant_configs()[0]
    top, bottom = pred.retrieve_extremes(query, pool, sim_config, config.k)

    out = _ensure_output_dir(config)
    with (out / "neighbors.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["group", "rank", "ticker", "year", "month", "score"])
        for rank, n in enumerate(top, start=1):
            writer.writerow(["most_similar", rank, n.asset_id, n.anchor_month.year,
                             n.anchor_month.month, repr(n.score)])
        for rank, n in enumerate(bottom, start=1):
            writer.writerow(["least_similar", rank, n.asset_id, n.anchor_month.year,
                             n.anchor_month.month, repr(n.score)])
    cfgmod.write_resolved_config(config, out / "neighbors_config.json")
    if config.figures:
        from . import figures

        figures.save_neighbor_figure(cb.QueryCase.from_case(query), top, bottom, pool,
                                     out / "neighbors.png")
    print(f"query {args.asset}@{month} under {sim_config.variant} "
          f"against {len(pool)} candidates")
    for n in top:
        print(f"  most similar   {n.asset_id:<8} {n.anchor_month}  score {n.score: .6f}")
    for n in bottom:
        print(f"  least similar  {n.asset_id:<8} {n.anchor_month}  score {n.score: .6f}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1

    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        config = cfgmod.load_config(args.config, _overrides(args))
        args.func(config, args)
        return 0
    except CbrqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # pragma: no cover - safety net
        logger.exception("unexpected failure")
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
