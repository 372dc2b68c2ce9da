"""Market data ingestion.

Turns daily adjusted-close price files into validated monthly return
series.  The chain is: parse daily observations, resample to month-end
prices, difference into simple monthly returns.
"""

from __future__ import annotations

import csv
import io
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, TextIO

from .errors import (
    InsufficientDataError,
    MonthGapError,
    PriceParseError,
    ValidationError,
)
from .months import Month, month_range, months_between

DATE_COLUMN = "Date"
PRICE_COLUMN = "Adj Close"

_MISSING_TOKENS = {"", "null", "nan", "na", "none"}


@dataclass(frozen=True)
class DailyPriceSeries:
    """Dated positive prices for one asset, strictly ascending by date."""

    asset_id: str
    dates: tuple[date, ...]
    prices: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.asset_id:
            raise ValidationError("asset_id must be non-empty")
        if len(self.dates) != len(self.prices):
            raise ValidationError(f"{self.asset_id}: dates and prices differ in length")
        for d_prev, d_next in zip(self.dates, self.dates[1:]):
            if d_next <= d_prev:
                raise ValidationError(f"{self.asset_id}: dates not strictly ascending at {d_next}")
        for d, p in zip(self.dates, self.prices):
            if not p > 0.0:
                raise ValidationError(f"{self.asset_id}: non-positive price {p} on {d}")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class MonthlyPriceSeries:
    """Month-end prices over a contiguous month span."""

    asset_id: str
    months: tuple[Month, ...]
    prices: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.months) != len(self.prices):
            raise ValidationError(f"{self.asset_id}: months and prices differ in length")
        for m_prev, m_next in zip(self.months, self.months[1:]):
            if months_between(m_prev, m_next) != 1:
                raise ValidationError(f"{self.asset_id}: months not contiguous at {m_next}")
        for m, p in zip(self.months, self.prices):
            if not p > 0.0:
                raise ValidationError(f"{self.asset_id}: non-positive price {p} in {m}")

    def __len__(self) -> int:
        return len(self.months)


@dataclass(frozen=True)
class ReturnSeries:
    """Simple monthly returns over a contiguous month span.

    The month label of each return is the month of the later price in the
    pair that produced it.  Simple returns from positive prices always
    exceed -1.
    """

    asset_id: str
    months: tuple[Month, ...]
    returns: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.months) != len(self.returns):
            raise ValidationError(f"{self.asset_id}: months and returns differ in length")
        for m_prev, m_next in zip(self.months, self.months[1:]):
            if months_between(m_prev, m_next) != 1:
                raise ValidationError(f"{self.asset_id}: months not contiguous at {m_next}")
        for m, r in zip(self.months, self.returns):
            if not r > -1.0:
                raise ValidationError(f"{self.asset_id}: return {r} in {m} not greater than -1")

    def __len__(self) -> int:
        return len(self.returns)


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in _MISSING_TOKENS


def parse_daily_prices(source: str | TextIO | Iterable[str], asset_id: str) -> DailyPriceSeries:
    """Parse a daily price CSV with Date and Adj Close columns.

    Rows with a missing price are dropped.  Out-of-order rows are
    re-sorted by date.  Extra columns are ignored.

    Parameters
    ----------
    source : text, open file, or iterable of lines
    asset_id : ticker to attach to the series

    Raises
    ------
    PriceParseError
        Missing required columns, or a malformed date or price (the
        message names the offending row).
    ValidationError
        Duplicate dates or non-positive prices.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise PriceParseError(f"{asset_id}: empty price file") from None
    columns = [cell.strip() for cell in header]
    try:
        date_idx = columns.index(DATE_COLUMN)
        price_idx = columns.index(PRICE_COLUMN)
    except ValueError:
        raise PriceParseError(
            f"{asset_id}: header must contain {DATE_COLUMN!r} and {PRICE_COLUMN!r} columns, got {columns}"
        ) from None

    rows: list[tuple[date, float]] = []
    seen: set[date] = set()
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) <= max(date_idx, price_idx):
            raise PriceParseError(f"{asset_id}: row {row_number}: too few columns")
        raw_date = row[date_idx].strip()
        raw_price = row[price_idx]
        try:
            observed = date.fromisoformat(raw_date)
        except ValueError:
            raise PriceParseError(f"{asset_id}: row {row_number}: malformed date {raw_date!r}") from None
        if _is_missing(raw_price):
            continue
        try:
            price = float(raw_price)
        except ValueError:
            raise PriceParseError(f"{asset_id}: row {row_number}: malformed price {raw_price!r}") from None
        if math.isnan(price):
            continue
        if observed in seen:
            raise ValidationError(f"{asset_id}: duplicate date {observed}")
        if not price > 0.0:
            raise ValidationError(f"{asset_id}: row {row_number}: non-positive price {price} on {observed}")
        seen.add(observed)
        rows.append((observed, price))

    rows.sort(key=lambda item: item[0])
    return DailyPriceSeries(
        asset_id=asset_id,
        dates=tuple(d for d, _ in rows),
        prices=tuple(p for _, p in rows),
    )


def read_daily_prices(path: str | Path, asset_id: str | None = None) -> DailyPriceSeries:
    """Read a daily price CSV; the filename stem is the ticker by default."""
    path = Path(path)
    ticker = asset_id if asset_id is not None else path.stem
    with path.open(newline="") as handle:
        return parse_daily_prices(handle, ticker)


def to_month_end_prices(daily: DailyPriceSeries, allow_gap_fill_days: int = 0) -> MonthlyPriceSeries:
    """Resample daily prices to the last observation of each calendar month.

    Every month between the first and last observation must contain at
    least one observation.  When allow_gap_fill_days > 0, a month with no
    observations is filled with the price of the preceding observation,
    provided the surrounding observation gap is at most that many days.

    Raises MonthGapError naming the first uncovered month otherwise.
    """
    if allow_gap_fill_days < 0:
        raise ValidationError("allow_gap_fill_days must be >= 0")
    if len(daily) == 0:
        raise InsufficientDataError(f"{daily.asset_id}: no price observations")

    last_in_month: dict[Month, float] = {}
    for d, p in zip(daily.dates, daily.prices):
        last_in_month[Month.from_date(d)] = p

    span = month_range(Month.from_date(daily.dates[0]), Month.from_date(daily.dates[-1]))
    prices: list[float] = []
    for m in span:
        if m in last_in_month:
            prices.append(last_in_month[m])
            continue
        # interior month with no observations: fill only across a short gap
        month_start = date(m.year, m.month, 1)
        prev_idx = bisect_left(daily.dates, month_start) - 1
        next_idx = bisect_right(daily.dates, month_start)
        gap_days = (daily.dates[next_idx] - daily.dates[prev_idx]).days
        if allow_gap_fill_days and gap_days <= allow_gap_fill_days:
            prices.append(daily.prices[prev_idx])
        else:
            raise MonthGapError(daily.asset_id, m)
    return MonthlyPriceSeries(asset_id=daily.asset_id, months=tuple(span), prices=tuple(prices))


def to_returns(monthly: MonthlyPriceSeries) -> ReturnSeries:
    """Difference month-end prices into simple returns p[t]/p[t-1] - 1."""
    if len(monthly) < 2:
        raise InsufficientDataError(
            f"{monthly.asset_id}: need at least 2 month-end prices, got {len(monthly)}"
        )
    returns = tuple(
        monthly.prices[i] / monthly.prices[i - 1] - 1.0 for i in range(1, len(monthly))
    )
    return ReturnSeries(asset_id=monthly.asset_id, months=monthly.months[1:], returns=returns)


def ingest_price_file(path: str | Path, allow_gap_fill_days: int = 0) -> ReturnSeries:
    """Full chain for one file: parse, resample, difference."""
    daily = read_daily_prices(path)
    monthly = to_month_end_prices(daily, allow_gap_fill_days=allow_gap_fill_days)
    return to_returns(monthly)


def write_returns_csv(series: ReturnSeries, path: str | Path) -> None:
    """Write a return series as ticker,year,month,return rows."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["ticker", "year", "month", "return"])
        for m, r in zip(series.months, series.returns):
            writer.writerow([series.asset_id, m.year, m.month, repr(r)])


def read_returns_csv(path: str | Path) -> ReturnSeries:
    """Read back a ticker,year,month,return file written by write_returns_csv."""
    path = Path(path)
    months: list[Month] = []
    returns: list[float] = []
    ticker: str | None = None
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [cell.strip() for cell in header] != ["ticker", "year", "month", "return"]:
            raise PriceParseError(f"{path}: expected header ticker,year,month,return")
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise PriceParseError(f"{path}: row {row_number}: expected 4 columns")
            if ticker is None:
                ticker = row[0]
            elif row[0] != ticker:
                raise ValidationError(f"{path}: row {row_number}: mixed tickers {ticker!r} and {row[0]!r}")
            try:
                months.append(Month(int(row[1]), int(row[2])))
                returns.append(float(row[3]))
            except ValueError:
                raise PriceParseError(f"{path}: row {row_number}: malformed value") from None
    if ticker is None:
        raise InsufficientDataError(f"{path}: no return rows")
    return ReturnSeries(asset_id=ticker, months=tuple(months), returns=tuple(returns))
