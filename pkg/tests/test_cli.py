from __future__ import annotations

import json

import pytest

from cbrq.cli import main

from conftest import business_day_prices, write_price_csv


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Shared daily prices, ingested returns and a persisted case base."""
    root = tmp_path_factory.mktemp("cliws")
    data = root / "daily"
    data.mkdir()
    for i in range(6):
        rows = business_day_prices(seed=100 + i, start_year=2005, n_years=2.6)
        write_price_csv(data / f"AST{i}.csv", rows)
    (data / "BADHDR.csv").write_text("Datum,Schluss\n2005-01-03,10\n")
    write_price_csv(
        data / "SHORTY.csv", business_day_prices(seed=999, start_year=2005, n_years=0.05)
    )
    out = root / "base"
    assert main(["ingest", "--data-dir", str(data), "--output-dir", str(out)]) == 0
    assert main(["build", "--output-dir", str(out)]) == 0
    return root


def stage_flags(workspace, output_dir):
    base = workspace / "base"
    return [
        "--casebase", str(base / "casebase.jsonl"),
        "--returns-dir", str(base / "returns"),
        "--output-dir", str(output_dir),
    ]


class TestIngestAndBuild:
    def test_ingest_outputs(self, workspace, capsys):
        out = workspace / "base"
        returns = sorted(p.name for p in (out / "returns").glob("*.csv"))
        assert returns == [f"AST{i}.csv" for i in range(6)]
        rejects = (out / "rejects.csv").read_text().splitlines()
        assert rejects[0] == "ticker,reason"
        rejected = {line.split(",")[0] for line in rejects[1:]}
        assert rejected == {"BADHDR", "SHORTY"}
        assert (out / "ingest_config.json").is_file()

    def test_ingest_reports_counts(self, workspace, tmp_path, capsys):
        out = tmp_path / "again"
        assert main(["ingest", "--data-dir", str(workspace / "daily"), "--output-dir", str(out)]) == 0
        stdout = capsys.readouterr().out
        assert "ingested 6 of 8 assets" in stdout
        assert "2 rejected" in stdout

    def test_build_outputs(self, workspace):
        out = workspace / "base"
        lines = (out / "casebase.jsonl").read_text().splitlines()
        header = json.loads(lines[0])
        assert header["format_version"] == 1
        assert header["window"] == 12
        assert len(lines) > 1
        assert (out / "build_config.json").is_file()

    def test_returns_csv_shape(self, workspace):
        lines = (workspace / "base" / "returns" / "AST0.csv").read_text().splitlines()
        assert lines[0] == "ticker,year,month,return"
        first = lines[1].split(",")
        assert first[0] == "AST0"
        assert first[1] == "2005" and first[2] == "2"


class TestErrorsCommand:
    def test_grid_csv_and_skips(self, workspace, tmp_path, capsys):
        out = tmp_path / "errors"
        rc = main(
            ["errors", *stage_flags(workspace, out),
             "--ks", "1,5", "--variants", "ProposedAdjusted,CumulativeOnly", "--no-figures"]
        )
        assert rc == 0
        lines = (out / "errors.csv").read_text().splitlines()
        assert lines[0] == "variant,k,mean_abs_error,query_count"
        assert len(lines) == 1 + 4
        assert (out / "skips.csv").read_text().splitlines()[0] == "ticker,year,month,reason"
        assert (out / "errors_config.json").is_file()
        stdout = capsys.readouterr().out
        assert "ProposedAdjusted" in stdout and "CumulativeOnly" in stdout

    def test_reruns_are_byte_identical(self, workspace, tmp_path):
        first = tmp_path / "a"
        second = tmp_path / "b"
        flags = ["--ks", "1,5", "--variants", "ProposedAdjusted", "--no-figures"]
        assert main(["errors", *stage_flags(workspace, first), *flags]) == 0
        assert main(["errors", *stage_flags(workspace, second), *flags]) == 0
        assert (first / "errors.csv").read_bytes() == (second / "errors.csv").read_bytes()


class TestSweepCommand:
    def test_sweep_and_histogram_csvs(self, workspace, tmp_path, capsys):
        out = tmp_path / "sweep"
        rc = main(
            ["sweep", *stage_flags(workspace, out),
             "--weight-grid", "0,0.5,1", "--sweep-k", "5", "--bins", "8", "--no-figures"]
        )
        assert rc == 0
        sweep = (out / "weight_sweep.csv").read_text().splitlines()
        assert sweep[0] == "w,mean_error"
        assert len(sweep) == 4
        hist = (out / "similarity_histogram.csv").read_text().splitlines()
        assert hist[0] == "bin_left,bin_right,count"
        assert len(hist) == 9
        stdout = capsys.readouterr().out
        assert "minimum mean relative error" in stdout

    def test_figures_rendered_when_enabled(self, workspace, tmp_path):
        out = tmp_path / "sweepfig"
        rc = main(
            ["sweep", *stage_flags(workspace, out),
             "--weight-grid", "0,1", "--sweep-k", "3", "--bins", "5", "--figures"]
        )
        assert rc == 0
        for name in ("weight_sweep.png", "similarity_histogram.png"):
            figure = out / name
            assert figure.is_file() and figure.stat().st_size > 0


class TestBacktestCommand:
    def test_outputs_and_summary_json(self, workspace, tmp_path, capsys):
        out = tmp_path / "bt"
        rc = main(
            ["backtest", *stage_flags(workspace, out),
             "--runs", "2", "--top-n", "3", "--k", "5",
             "--variants", "ProposedAdjusted", "--no-figures", "--no-per-run-ledgers"]
        )
        assert rc == 0
        bdir = out / "backtest"
        table = (bdir / "summary_table.csv").read_text().splitlines()
        assert len(table) == 2
        assert len(table[0].split(",")) == 9
        boot = (bdir / "bootstrap_summary.csv").read_text().splitlines()
        assert len(boot) == 3
        payload = json.loads((bdir / "bootstrap_summary.json").read_text())
        assert payload["runs"] == 2
        assert "config" not in payload
        assert (bdir / "ledgers" / "ProposedAdjusted_full.csv").is_file()
        assert not (bdir / "ledgers" / "ProposedAdjusted").exists()
        assert (bdir / "backtest_config.json").is_file()
        assert "ProposedAdjusted:" in capsys.readouterr().out

    def test_per_run_ledgers(self, workspace, tmp_path):
        out = tmp_path / "btruns"
        rc = main(
            ["backtest", *stage_flags(workspace, out),
             "--runs", "2", "--top-n", "3", "--k", "5",
             "--variants", "CumulativeOnly", "--no-figures", "--per-run-ledgers"]
        )
        assert rc == 0
        run_dir = out / "backtest" / "ledgers" / "CumulativeOnly"
        assert (run_dir / "run_0000.csv").is_file()
        assert (run_dir / "run_0001.csv").is_file()

    def test_value_path_figure(self, workspace, tmp_path):
        out = tmp_path / "btfig"
        rc = main(
            ["backtest", *stage_flags(workspace, out),
             "--runs", "1", "--top-n", "3", "--k", "5",
             "--variants", "ProposedAdjusted", "--figures", "--no-per-run-ledgers"]
        )
        assert rc == 0
        figure = out / "backtest" / "value_paths.png"
        assert figure.is_file() and figure.stat().st_size > 0


class TestNeighborsCommand:
    def test_neighbor_listing(self, workspace, tmp_path, capsys):
        out = tmp_path / "nb"
        rc = main(
            ["neighbors", *stage_flags(workspace, out),
             "--asset", "AST0", "--month", "2007-03", "--k", "4", "--no-figures"]
        )
        assert rc == 0
        lines = (out / "neighbors.csv").read_text().splitlines()
        assert lines[0] == "group,rank,ticker,year,month,score"
        groups = [line.split(",")[0] for line in lines[1:]]
        assert groups.count("most_similar") == 4
        assert groups.count("least_similar") == 4
        stdout = capsys.readouterr().out
        assert "most similar" in stdout and "least similar" in stdout

    def test_variant_flag_and_figure(self, workspace, tmp_path):
        out = tmp_path / "nbfig"
        rc = main(
            ["neighbors", *stage_flags(workspace, out),
             "--asset", "AST1", "--month", "2007-02", "--k", "3",
             "--variant", "Shape", "--figures"]
        )
        assert rc == 0
        figure = out / "neighbors.png"
        assert figure.is_file() and figure.stat().st_size > 0
        config = json.loads((out / "neighbors_config.json").read_text())
        assert config["k"] == 3


class TestConfigPlumbing:
    def test_config_file_with_flag_override(self, workspace, tmp_path):
        out = tmp_path / "cfg"
        path = tmp_path / "run.json"
        path.write_text(
            json.dumps(
                {
                    "ks": [1, 5],
                    "variants": ["ProposedAdjusted"],
                    "figures": False,
                    "output_dir": str(out),
                    "casebase": str(workspace / "base" / "casebase.jsonl"),
                }
            )
        )
        assert main(["errors", "--config", str(path), "--ks", "1"]) == 0
        resolved = json.loads((out / "errors_config.json").read_text())
        assert resolved["ks"] == [1]
        assert resolved["variants"] == ["ProposedAdjusted"]
        lines = (out / "errors.csv").read_text().splitlines()
        assert len(lines) == 2

    def test_env_config_fallback(self, workspace, tmp_path, monkeypatch):
        out = tmp_path / "envcfg"
        path = tmp_path / "env.json"
        path.write_text(
            json.dumps(
                {
                    "ks": [1],
                    "variants": ["CumulativeOnly"],
                    "figures": False,
                    "output_dir": str(out),
                    "casebase": str(workspace / "base" / "casebase.jsonl"),
                }
            )
        )
        monkeypatch.setenv("CBRQ_CONFIG", str(path))
        assert main(["errors"]) == 0
        assert (out / "errors.csv").is_file()

    def test_unknown_config_key_fails_fast(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"windows": 12}))
        assert main(["build", "--config", str(path)]) == 1


class TestExitCodes:
    def test_usage_errors_exit_one(self, tmp_path):
        assert main(["ingest", "--output-dir", str(tmp_path / "x")]) == 1
        assert main(["ingest", "--data-dir", str(tmp_path / "nowhere")]) == 1
        assert main(["errors", "--variants", "Bogus", "--output-dir", str(tmp_path / "y")]) == 1

    def test_argparse_failures_exit_one(self, capsys):
        assert main(["--nope"]) == 1
        assert main([]) == 1
        capsys.readouterr()

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "ingest" in capsys.readouterr().out

    def test_data_errors_exit_two(self, workspace, tmp_path, capsys):
        missing = tmp_path / "void"
        assert main(["errors", "--output-dir", str(missing)]) == 2
        assert main(["build", "--output-dir", str(missing)]) == 2
        rc = main(
            ["neighbors", *stage_flags(workspace, tmp_path / "nbmiss"),
             "--asset", "AST0", "--month", "2090-01", "--no-figures"]
        )
        assert rc == 2
        capsys.readouterr()

    def test_oversized_portfolio_exits_two(self, workspace, tmp_path):
        rc = main(
            ["backtest", *stage_flags(workspace, tmp_path / "btbig"),
             "--runs", "1", "--top-n", "7", "--k", "5",
             "--variants", "ProposedAdjusted", "--no-figures"]
        )
        assert rc == 2
