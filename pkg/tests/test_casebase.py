from __future__ import annotations

import logging

import numpy as np
import pytest

from cbrq.casebase import (
    Case,
    CaseBase,
    QueryCase,
    build_case_base,
    build_cases,
    load_case_base,
    rolling_case_base,
    save_case_base,
)
from cbrq.errors import (
    CaseBaseIntegrityError,
    CaseBaseLoadError,
    CaseLookupError,
    EmptyCaseBaseError,
    UsageError,
    ValidationError,
)
from cbrq.months import Month

from conftest import START, make_series, random_universe


class TestBuildCases:
    def test_window_exactly_consumes_short_series(self):
        series = make_series("AAA", [0.01] * 12)
        assert build_cases(series, 12) == []

    def test_one_case_from_thirteen_returns(self):
        returns = [0.01 * (i + 1) for i in range(13)]
        series = make_series("AAA", returns)
        cases = build_cases(series, 12)
        assert len(cases) == 1
        case = cases[0]
        assert case.description == tuple(returns[:12])
        assert case.solution == returns[12]
        assert case.anchor_month == START.shift(11)

    def test_count_law(self):
        for length in (0, 1, 5, 12, 13, 50, 180):
            series = make_series("AAA", [0.001] * length)
            assert len(build_cases(series, 12)) == max(0, length - 12)

    def test_window_override(self):
        series = make_series("AAA", [0.01] * 10)
        assert len(build_cases(series, 6)) == 4
        assert len(build_cases(series, 6)[0].description) == 6

    def test_anchors_strictly_increase(self):
        series = make_series("AAA", [0.001 * i for i in range(40)])
        cases = build_cases(series)
        anchors = [c.anchor_month for c in cases]
        assert anchors == sorted(anchors)
        assert len(set(anchors)) == len(anchors)

    def test_invalid_window(self):
        with pytest.raises(UsageError):
            build_cases(make_series("AAA", [0.01] * 20), 0)

    def test_case_rejects_returns_at_or_below_minus_one(self):
        with pytest.raises(ValidationError):
            Case("AAA", Month(2005, 12), (-1.0, 0.1), 0.05)
        with pytest.raises(ValidationError):
            Case("AAA", Month(2005, 12), (0.0, 0.1), -1.5)


class TestCaseBase:
    def test_pooled_build(self):
        universe = [make_series("AAA", [0.01] * 14), make_series("BBB", [0.02] * 14)]
        base = build_case_base(universe, 12)
        assert len(base) == 4
        assert {c.asset_id for c in base} == {"AAA", "BBB"}

    def test_duplicate_asset_rejected(self):
        universe = [make_series("AAA", [0.01] * 14), make_series("AAA", [0.02] * 14)]
        with pytest.raises(CaseBaseIntegrityError, match="duplicate asset"):
            build_case_base(universe, 12)

    def test_duplicate_case_key_rejected(self):
        case = Case("AAA", Month(2006, 1), tuple([0.01] * 12), 0.02)
        with pytest.raises(CaseBaseIntegrityError, match="duplicate case key"):
            CaseBase(cases=(case, case), window=12)

    def test_window_mismatch_rejected(self):
        case = Case("AAA", Month(2006, 1), tuple([0.01] * 11), 0.02)
        with pytest.raises(CaseBaseIntegrityError, match="length"):
            CaseBase(cases=(case,), window=12)

    def test_lookup(self):
        base = build_case_base([make_series("AAA", [0.01] * 14)], 12)
        anchor = START.shift(11)
        assert base.case("AAA", anchor).anchor_month == anchor
        assert base.get("ZZZ", anchor) is None
        with pytest.raises(CaseLookupError):
            base.case("ZZZ", anchor)

    def test_anchor_months_sorted(self):
        base = build_case_base(random_universe(3, 30, seed=1), 12)
        months = base.anchor_months
        assert months == sorted(months)
        assert len(base.cases_in_month(months[0])) == 3

    def test_empty_base(self):
        base = CaseBase(cases=(), window=12)
        assert len(base) == 0
        assert base.anchor_months == []

    def test_build_is_deterministic(self):
        a = build_case_base(random_universe(4, 30, seed=2), 12)
        b = build_case_base(random_universe(4, 30, seed=2), 12)
        assert a == b


class TestRollingCaseBase:
    def test_full_coverage_cardinality(self):
        universe = random_universe(5, 30, seed=3)
        base = build_case_base(universe, 12)
        query = QueryCase.from_case(base.case("A000", START.shift(20)))
        pool = rolling_case_base(query, base, horizon=3)
        assert len(pool) == 5 * 3

    def test_only_prior_months_selected(self):
        rng = np.random.default_rng(4)
        base = build_case_base(random_universe(6, 40, seed=4), 12)
        for case in base.cases:
            if case.anchor_month <= base.anchor_months[0]:
                continue
            horizon = int(rng.integers(1, 9))
            pool = rolling_case_base(case, base, horizon)
            lo = case.anchor_month.shift(-horizon)
            for candidate in pool:
                assert lo <= candidate.anchor_month < case.anchor_month

    def test_horizon_one_single_asset(self):
        base = build_case_base([make_series("AAA", [0.01 * i for i in range(20)])], 12)
        query = base.case("AAA", base.anchor_months[-1])
        pool = rolling_case_base(query, base, horizon=1)
        assert len(pool) == 1

    def test_no_prior_cases_is_an_error(self):
        base = build_case_base([make_series("AAA", [0.005] * 20)], 12)
        first = base.case("AAA", base.anchor_months[0])
        with pytest.raises(EmptyCaseBaseError):
            rolling_case_base(first, base, horizon=6)

    def test_partial_horizon_warns_but_works(self, caplog):
        base = build_case_base([make_series("AAA", [0.005] * 20)], 12)
        second = base.case("AAA", base.anchor_months[2])
        with caplog.at_level(logging.WARNING, logger="cbrq.casebase"):
            pool = rolling_case_base(second, base, horizon=6)
        assert len(pool) == 2
        assert any("2 of 6 prior months" in message for message in caplog.messages)

    def test_window_preserved(self):
        base = build_case_base(random_universe(3, 30, seed=5), 12)
        query = base.case("A000", base.anchor_months[-1])
        assert rolling_case_base(query, base, 4).window == 12


class TestPersistence:
    def test_round_trip_is_value_identical(self, tmp_path):
        base = build_case_base(random_universe(5, 28, seed=6), 12)
        path = tmp_path / "cases.jsonl"
        save_case_base(base, path)
        assert load_case_base(path) == base

    def test_empty_base_round_trips(self, tmp_path):
        base = CaseBase(cases=(), window=12)
        path = tmp_path / "cases.jsonl"
        save_case_base(base, path)
        loaded = load_case_base(path)
        assert loaded == base
        assert loaded.window == 12

    def test_truncated_file_names_last_valid_record(self, tmp_path):
        base = build_case_base(random_universe(2, 16, seed=7), 12)
        path = tmp_path / "cases.jsonl"
        save_case_base(base, path)
        lines = path.read_text().splitlines()
        cut = lines[:4]
        cut.append(lines[4][: len(lines[4]) // 2])
        path.write_text("\n".join(cut))
        with pytest.raises(CaseBaseLoadError, match="last valid record is 3") as exc_info:
            load_case_base(path)
        assert exc_info.value.record == 4

    def test_corrupt_record_rejected(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        save_case_base(build_case_base(random_universe(1, 14, seed=8), 12), path)
        lines = path.read_text().splitlines()
        lines[1] = '{"ticker": "AAA"}'
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CaseBaseLoadError, match="record 1"):
            load_case_base(path)

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        path.write_text('{"format_version": 99, "window": 12}\n')
        with pytest.raises(CaseBaseLoadError, match="format_version"):
            load_case_base(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "cases.jsonl"
        path.write_text("")
        with pytest.raises(CaseBaseLoadError, match="header"):
            load_case_base(path)
