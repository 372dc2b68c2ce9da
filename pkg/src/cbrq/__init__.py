"""Case-based monthly stock return prediction.

Windows of consecutive monthly returns are matched against recent
history with a hybrid similarity metric; the next-month returns of the
closest matches vote on the prediction, and a compounding top-n
portfolio simulation with an asset-dropout bootstrap measures what the
predictions are worth.
"""

from .backtest import (
    BacktestConfig,
    BacktestResult,
    BootstrapSummary,
    annualised_return,
    annualised_volatility,
    bootstrap_backtest,
    derive_run_seed,
    run_backtest,
    run_pipeline,
)
from .casebase import (
    Case,
    CaseBase,
    QueryCase,
    build_case_base,
    build_cases,
    load_case_base,
    rolling_case_base,
    save_case_base,
)
from .config import RunConfig, load_config
from .errors import (
    CaseBaseIntegrityError,
    CaseBaseLoadError,
    CbrqError,
    DataError,
    EmptyCaseBaseError,
    EmptyRetrievalError,
    InsufficientDataError,
    MonthGapError,
    PredictionError,
    PriceParseError,
    UndefinedCorrelationError,
    UsageError,
    ValidationError,
)
from .market_data import (
    DailyPriceSeries,
    MonthlyPriceSeries,
    ReturnSeries,
    ingest_price_file,
    parse_daily_prices,
    read_returns_csv,
    to_month_end_prices,
    to_returns,
    write_returns_csv,
)
from .months import Month
from .prediction import (
    ErrorReport,
    HistogramReport,
    Neighbor,
    Prediction,
    WeightSweepReport,
    evaluate_errors,
    predict_return,
    retrieve_top_k,
    select_queries,
    similarity_histogram,
    similarity_weighted_mean,
    weight_sweep,
)
from .similarity import (
    SimilarityConfig,
    SimilarityScore,
    SimilarityVariant,
    adjusted_corr,
    combined_sim,
    combined_sim_pearson,
    cumulative_distance,
    pearson,
    score,
    shape_sim,
)

__version__ = "0.1.0"

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "BootstrapSummary",
    "Case",
    "CaseBase",
    "CaseBaseIntegrityError",
    "CaseBaseLoadError",
    "CbrqError",
    "DailyPriceSeries",
    "DataError",
    "EmptyCaseBaseError",
    "EmptyRetrievalError",
    "ErrorReport",
    "HistogramReport",
    "InsufficientDataError",
    "Month",
    "MonthGapError",
    "MonthlyPriceSeries",
    "Neighbor",
    "Prediction",
    "PredictionError",
    "PriceParseError",
    "QueryCase",
    "ReturnSeries",
    "RunConfig",
    "SimilarityConfig",
    "SimilarityScore",
    "SimilarityVariant",
    "UndefinedCorrelationError",
    "UsageError",
    "ValidationError",
    "WeightSweepReport",
    "adjusted_corr",
    "annualised_return",
    "annualised_volatility",
    "bootstrap_backtest",
    "build_case_base",
    "build_cases",
    "combined_sim",
    "combined_sim_pearson",
    "cumulative_distance",
    "derive_run_seed",
    "evaluate_errors",
    "ingest_price_file",
    "load_case_base",
    "load_config",
    "parse_daily_prices",
    "pearson",
    "predict_return",
    "read_returns_csv",
    "retrieve_top_k",
    "rolling_case_base",
    "run_backtest",
    "run_pipeline",
    "save_case_base",
    "score",
    "select_queries",
    "shape_sim",
    "similarity_histogram",
    "similarity_weighted_mean",
    "to_month_end_prices",
    "to_returns",
    "weight_sweep",
    "write_returns_csv",
]
