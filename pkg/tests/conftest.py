"""Shared synthetic-data builders for the test suite."""

from __future__ import annotations

import numpy as np

from cbrq.casebase import Case, CaseBase, QueryCase
from cbrq.market_data import ReturnSeries
from cbrq.months import Month

START = Month(2005, 1)


def make_series(asset_id: str, returns, start: Month = START) -> ReturnSeries:
    months = tuple(start.shift(i) for i in range(len(returns)))
    return ReturnSeries(asset_id=asset_id, months=months, returns=tuple(float(r) for r in returns))


def random_universe(n_assets: int, n_months: int, seed: int, lo=-0.2, hi=0.2) -> list[ReturnSeries]:
    rng = np.random.default_rng(seed)
    return [make_series(f"A{i:03d}", rng.uniform(lo, hi, n_months)) for i in range(n_assets)]


# four six-month return patterns; the cycle matches the default horizon so a
# candidate six months back is phase-aligned with its query
REGIME_TEMPLATES = (
    (0.04, -0.02, 0.05, -0.03, 0.02, -0.04),
    (-0.05, 0.03, -0.02, 0.06, -0.03, 0.02),
    (0.02, 0.04, -0.06, 0.01, 0.03, -0.05),
    (-0.03, -0.04, 0.05, 0.02, -0.05, 0.06),
)


def regime_universe(n_assets: int, n_months: int, seed: int, noise: float = 0.01) -> list[ReturnSeries]:
    """Assets repeat one of four return templates plus Gaussian noise."""
    rng = np.random.default_rng(seed)
    universe = []
    for a in range(n_assets):
        template = REGIME_TEMPLATES[a % len(REGIME_TEMPLATES)]
        returns = [
            template[t % len(template)] + float(rng.normal(0.0, noise)) for t in range(n_months)
        ]
        universe.append(make_series(f"A{a:02d}", returns))
    return universe


def random_case_base(
    rng: np.random.Generator,
    n_cases: int,
    window: int = 12,
    n_assets: int = 8,
    n_anchor_months: int = 24,
    tie_fraction: float = 0.0,
) -> tuple[CaseBase, QueryCase]:
    """A case base of random cases plus a query anchored after all of them.

    With tie_fraction > 0 some descriptions are exact copies of earlier
    ones, which forces equal scores and exercises tie-breaking.
    """
    keys: list[tuple[int, int]] = []
    for asset in range(n_assets):
        for slot in range(n_anchor_months):
            keys.append((asset, slot))
    picked = rng.permutation(len(keys))[:n_cases]
    cases: list[Case] = []
    descriptions: list[tuple[float, ...]] = []
    for idx in sorted(int(i) for i in picked):
        asset, slot = keys[idx]
        if descriptions and rng.random() < tie_fraction:
            description = descriptions[int(rng.integers(len(descriptions)))]
        else:
            description = tuple(float(r) for r in rng.uniform(-0.4, 0.4, window))
        descriptions.append(description)
        cases.append(
            Case(
                asset_id=f"A{asset:03d}",
                anchor_month=START.shift(slot),
                description=description,
                solution=float(rng.uniform(-0.4, 0.4)),
            )
        )
    base = CaseBase(cases=tuple(cases), window=window)
    query = QueryCase(
        asset_id="QRY",
        anchor_month=START.shift(n_anchor_months),
        description=tuple(float(r) for r in rng.uniform(-0.4, 0.4, window)),
        solution=float(rng.uniform(-0.4, 0.4)),
    )
    return base, query


def business_day_prices(seed: int, start_year: int, n_years: float, drift=0.0003, vol=0.012):
    """Weekday (date, price) observations from a geometric random walk."""
    from datetime import date, timedelta

    rng = np.random.default_rng(seed)
    rows = []
    price = float(rng.uniform(20.0, 200.0))
    d = date(start_year, 1, 3)
    end = date(start_year, 1, 3) + timedelta(days=int(365.25 * n_years))
    while d < end:
        if d.weekday() < 5:
            price *= float(np.exp(rng.normal(drift, vol)))
            rows.append((d, price))
        d += timedelta(days=1)
    return rows


def write_price_csv(path, rows) -> None:
    lines = ["Date,Open,High,Low,Close,Adj Close,Volume"]
    for d, p in rows:
        lines.append(f"{d.isoformat()},0,0,0,0,{p:.6f},1000")
    path.write_text("\n".join(lines) + "\n")
