"""Case construction, rolling candidate pools, and persistence.

A case pairs a fixed window of consecutive monthly returns (the
description) with the return of the following month (the solution).  The
anchor month of a case is the month of the last return in its
description, so the solution belongs to anchor + 1.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import similarity
from .errors import (
    CaseBaseIntegrityError,
    CaseBaseLoadError,
    CaseLookupError,
    EmptyCaseBaseError,
    UsageError,
    ValidationError,
)
from .market_data import ReturnSeries
from .months import Month

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

DEFAULT_WINDOW = 12
DEFAULT_HORIZON = 6


@dataclass(frozen=True)
class Case:
    """A description window of returns plus the next month's return."""

    asset_id: str
    anchor_month: Month
    description: tuple[float, ...]
    solution: float

    def __post_init__(self) -> None:
        if not self.asset_id:
            raise ValidationError("case asset_id must be non-empty")
        if not self.description:
            raise ValidationError(f"{self.key}: empty description")
        for r in self.description:
            if not r > -1.0:
                raise ValidationError(f"{self.key}: description return {r} not greater than -1")
        if not self.solution > -1.0:
            raise ValidationError(f"{self.key}: solution {self.solution} not greater than -1")

    @property
    def key(self) -> tuple[str, Month]:
        return (self.asset_id, self.anchor_month)


@dataclass(frozen=True)
class QueryCase:
    """A description to predict for; the solution is optional."""

    asset_id: str
    anchor_month: Month
    description: tuple[float, ...]
    solution: float | None = None

    @classmethod
    def from_case(cls, case: Case) -> "QueryCase":
        return cls(
            asset_id=case.asset_id,
            anchor_month=case.anchor_month,
            description=case.description,
            solution=case.solution,
        )

    @property
    def key(self) -> tuple[str, Month]:
        return (self.asset_id, self.anchor_month)


def build_cases(series: ReturnSeries, window: int = DEFAULT_WINDOW) -> list[Case]:
    """Slide a window over one return series.

    A series of L returns yields max(0, L - window) cases, anchored at
    strictly increasing months.
    """
    if window < 1:
        raise UsageError(f"window must be >= 1, got {window}")
    cases: list[Case] = []
    for t in range(window, len(series)):
        cases.append(
            Case(
                asset_id=series.asset_id,
                anchor_month=series.months[t - 1],
                description=tuple(series.returns[t - window : t]),
                solution=series.returns[t],
            )
        )
    return cases


@dataclass(frozen=True, eq=False)
class CaseBase:
    """An ordered collection of unique cases with a common window length.

    Row-aligned numpy views of the descriptions and per-case statistics
    are built eagerly so retrieval can score all candidates at once.
    """

    cases: tuple[Case, ...]
    window: int
    candidate_arrays: similarity.CandidateArrays = field(init=False, repr=False)
    solutions: np.ndarray = field(init=False, repr=False)
    anchor_ords: np.ndarray = field(init=False, repr=False)
    asset_ranks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise UsageError(f"window must be >= 1, got {self.window}")
        seen: set[tuple[str, Month]] = set()
        for case in self.cases:
            if len(case.description) != self.window:
                raise CaseBaseIntegrityError(
                    f"{case.key}: description length {len(case.description)} != window {self.window}"
                )
            if case.key in seen:
                raise CaseBaseIntegrityError(f"duplicate case key {case.key}")
            seen.add(case.key)

        matrix = np.array([c.description for c in self.cases], dtype=np.float64)
        matrix = matrix.reshape(len(self.cases), self.window)
        object.__setattr__(self, "candidate_arrays", similarity.CandidateArrays(matrix))
        object.__setattr__(
            self, "solutions", np.array([c.solution for c in self.cases], dtype=np.float64)
        )
        object.__setattr__(
            self,
            "anchor_ords",
            np.array([c.anchor_month.ordinal() for c in self.cases], dtype=np.int64),
        )
        # lexicographic ticker ranks give the sort a cheap integer key
        order = {a: i for i, a in enumerate(sorted({c.asset_id for c in self.cases}))}
        object.__setattr__(
            self, "asset_ranks", np.array([order[c.asset_id] for c in self.cases], dtype=np.int64)
        )
        by_key = {c.key: c for c in self.cases}
        object.__setattr__(self, "_by_key", by_key)
        by_month: dict[Month, list[int]] = {}
        for i, c in enumerate(self.cases):
            by_month.setdefault(c.anchor_month, []).append(i)
        object.__setattr__(self, "_by_month", by_month)

    def __len__(self) -> int:
        return len(self.cases)

    def __iter__(self) -> Iterator[Case]:
        return iter(self.cases)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CaseBase):
            return NotImplemented
        return self.window == other.window and self.cases == other.cases

    @property
    def anchor_months(self) -> list[Month]:
        return sorted(self._by_month)

    def cases_in_month(self, month: Month) -> list[Case]:
        return [self.cases[i] for i in self._by_month.get(month, [])]

    def get(self, asset_id: str, anchor_month: Month) -> Case | None:
        return self._by_key.get((asset_id, anchor_month))

    def case(self, asset_id: str, anchor_month: Month) -> Case:
        found = self.get(asset_id, anchor_month)
        if found is None:
            raise CaseLookupError(f"no case for {asset_id} anchored at {anchor_month}")
        return found


def build_case_base(universe: Iterable[ReturnSeries], window: int = DEFAULT_WINDOW) -> CaseBase:
    """Build the pooled case base for a universe of return series."""
    seen_assets: set[str] = set()
    cases: list[Case] = []
    for series in universe:
        if series.asset_id in seen_assets:
            raise CaseBaseIntegrityError(f"duplicate asset {series.asset_id!r} in universe")
        seen_assets.add(series.asset_id)
        cases.extend(build_cases(series, window))
    return CaseBase(cases=tuple(cases), window=window)


def rolling_case_base(
    query: QueryCase | Case, full: CaseBase, horizon: int = DEFAULT_HORIZON
) -> CaseBase:
    """Candidate pool for a query: cases anchored in the previous horizon months.

    Only months strictly before the query anchor are eligible, which is
    what keeps retrieval free of look-ahead.  Near the start of the
    timeline fewer than horizon months may exist; that is allowed but
    logged.  No prior cases at all is an error.
    """
    if horizon < 1:
        raise UsageError(f"horizon must be >= 1, got {horizon}")
    months = [query.anchor_month.shift(-j) for j in range(1, horizon + 1)]
    selected: list[Case] = []
    populated = 0
    for m in months:
        in_month = full.cases_in_month(m)
        if in_month:
            populated += 1
            selected.extend(in_month)
    if not selected:
        raise EmptyCaseBaseError(
            f"no cases anchored in the {horizon} months before {query.key}"
        )
    if populated < horizon:
        logger.warning(
            "rolling case base for %s@%s: only %d of %d prior months populated",
            query.asset_id,
            query.anchor_month,
            populated,
            horizon,
        )
    return CaseBase(cases=tuple(selected), window=full.window)


def save_case_base(base: CaseBase, destination: str | Path) -> None:
    """Persist a case base as JSON lines with a leading header record."""
    destination = Path(destination)
    with destination.open("w") as handle:
        handle.write(json.dumps({"format_version": FORMAT_VERSION, "window": base.window}) + "\n")
        for case in base.cases:
            record = {
                "ticker": case.asset_id,
                "anchor_year": case.anchor_month.year,
                "anchor_month": case.anchor_month.month,
                "description": list(case.description),
                "solution": case.solution,
            }
            handle.write(json.dumps(record) + "\n")


def load_case_base(source: str | Path) -> CaseBase:
    """Load a case base saved by save_case_base.

    Truncated or corrupt files raise CaseBaseLoadError naming the last
    record that read back cleanly.
    """
    source = Path(source)
    with source.open() as handle:
        lines = handle.read().splitlines()
    if not lines:
        raise CaseBaseLoadError(f"{source}: empty file, expected a header line")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise CaseBaseLoadError(f"{source}: malformed header line") from None
    if not isinstance(header, dict) or header.get("format_version") != FORMAT_VERSION:
        raise CaseBaseLoadError(
            f"{source}: unsupported format_version {header.get('format_version')!r}"
            if isinstance(header, dict)
            else f"{source}: malformed header line"
        )
    window = header.get("window")
    if not isinstance(window, int) or window < 1:
        raise CaseBaseLoadError(f"{source}: invalid window {window!r} in header")

    cases: list[Case] = []
    for record_number, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            case = Case(
                asset_id=record["ticker"],
                anchor_month=Month(record["anchor_year"], record["anchor_month"]),
                description=tuple(float(v) for v in record["description"]),
                solution=float(record["solution"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError):
            raise CaseBaseLoadError(
                f"{source}: record {record_number} is unreadable; last valid record is {record_number - 1}",
                record=record_number,
            ) from None
        cases.append(case)
    return CaseBase(cases=tuple(cases), window=window)
