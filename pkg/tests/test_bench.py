"""Tests for the Monte Carlo harness: replications, aggregation, table output and config."""
from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import linalg

from gdpc_shared.errors import BenchmarkIOError, GDPCError
from gdpc_shared.models import MethodName, ScenarioName
from packages.bench.harness import (
    CSV_COLUMNS,
    BenchConfig,
    BenchResult,
    BenchRow,
    derive_replication_seed,
    emit_table,
    read_table,
    render_markdown,
    run_benchmark,
    run_replication,
)
from packages.simulator.dfm import get_scenario


def _config(tmp_path, **overrides) -> BenchConfig:
    base = {
        "scenarios": ["DFM1"],
        "T_values": [30],
        "m_values": [10],
        "n_replications": 3,
        "base_seed": 17,
        "output_path": str(tmp_path / "results.csv"),
    }
    base.update(overrides)
    return BenchConfig.model_validate(base)


# ---------------------------------------------------------------------------
# Replications
# ---------------------------------------------------------------------------

class TestReplicationSeed:
    def test_deterministic(self):
        spec = get_scenario("DFM1")
        assert derive_replication_seed(5, spec, 100, 100, 7) == derive_replication_seed(5, spec, 100, 100, 7)

    def test_distinct_across_keys(self):
        dfm1, dfm2 = get_scenario("DFM1"), get_scenario("DFM2")
        seeds = {
            derive_replication_seed(5, dfm1, 100, 100, 0),
            derive_replication_seed(5, dfm1, 100, 100, 1),
            derive_replication_seed(5, dfm1, 100, 200, 0),
            derive_replication_seed(5, dfm1, 200, 100, 0),
            derive_replication_seed(5, dfm2, 100, 100, 0),
            derive_replication_seed(6, dfm1, 100, 100, 0),
        }
        assert len(seeds) == 6
        assert all(0 <= s < 2 ** 64 for s in seeds)


class TestRunReplication:
    def test_noiseless_sw_recovers_common_part(self):
        outcome = run_replication("DFM1", 40, 10, 0, 1, [MethodName.SW], noise_scale=0.0)
        assert outcome.rel_mse[MethodName.SW] <= 1e-8
        assert outcome.failures == {}

    def test_inequalities_hold(self):
        outcome = run_replication("DFM2", 50, 20, 0, 3, list(MethodName))
        assert set(outcome.rel_mse) == set(MethodName)
        assert outcome.gdpc_below_idio is True
        assert outcome.sw_below_gdpc is True
        assert outcome.violations == 0

    def test_failure_is_recorded(self):
        outcome = run_replication("DFM1", 8, 4, 0, 1, [MethodName.GDPC, MethodName.FHLR])
        assert MethodName.FHLR in outcome.failures
        assert "ParameterRangeError" in outcome.failures[MethodName.FHLR]
        assert MethodName.GDPC in outcome.rel_mse

    def test_reproducible(self):
        a = run_replication("DFM1AR", 30, 10, 2, 9, [MethodName.GDPC, MethodName.SW])
        b = run_replication("DFM1AR", 30, 10, 2, 9, [MethodName.GDPC, MethodName.SW])
        assert a.rel_mse == b.rel_mse

    def test_solver_failure_does_not_stop_other_methods(self, monkeypatch):
        def broken_eigh(*args, **kwargs):
            raise linalg.LinAlgError("eigenvalues did not converge")

        monkeypatch.setattr(linalg, "eigh", broken_eigh)
        outcome = run_replication("DFM1", 40, 10, 0, 1, list(MethodName))
        assert outcome.failures[MethodName.SW].startswith("EigenSolverError")
        assert outcome.failures[MethodName.FHLR].startswith("EigenSolverError")
        assert MethodName.GDPC in outcome.rel_mse
        assert outcome.gdpc_below_idio is not None
        assert outcome.sw_below_gdpc is None

    @pytest.mark.parametrize("T,m,rep", [(100, 400, 69), (200, 100, 42)])
    def test_ar_idiosyncratic_fits_stay_below_noise_level(self, T, m, rep):
        outcome = run_replication("DFM2AR", T, m, rep, 20240101, [MethodName.GDPC])
        assert outcome.gdpc_below_idio is True
        assert outcome.data_mse[MethodName.GDPC] < outcome.idio_mean_square


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

class TestRunBenchmark:
    def test_rows_and_files(self, tmp_path):
        config = _config(tmp_path)
        result = run_benchmark(config)
        assert [r.method for r in result.rows] == [MethodName.GDPC, MethodName.FHLR, MethodName.SW]
        assert all(r.n_reps == 3 and r.n_failed == 0 for r in result.rows)
        assert all(r.mean_rel_mse > 0 and r.se_rel_mse >= 0 for r in result.rows)
        lines = (tmp_path / "results.csv").read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 4
        assert (tmp_path / "results.md").exists()

    def test_deterministic(self, tmp_path):
        first = run_benchmark(_config(tmp_path), write=False)
        second = run_benchmark(_config(tmp_path), write=False)
        assert [r.mean_rel_mse for r in first.rows] == [r.mean_rel_mse for r in second.rows]

    def test_parallel_matches_serial(self, tmp_path):
        serial = run_benchmark(_config(tmp_path, n_replications=4), write=False)
        parallel = run_benchmark(_config(tmp_path, n_replications=4, parallelism=2), write=False)
        for a, b in zip(serial.rows, parallel.rows):
            assert (a.mean_rel_mse, a.se_rel_mse, a.n_reps) == (b.mean_rel_mse, b.se_rel_mse, b.n_reps)

    def test_tables_byte_identical_across_runs_and_workers(self, tmp_path):
        grid = {"scenarios": ["DFM1", "DFM2AR"], "n_replications": 4}
        runs = [("first", 1), ("second", 1), ("pool", 8)]
        for name, workers in runs:
            (tmp_path / name).mkdir()
            run_benchmark(_config(tmp_path / name, parallelism=workers, **grid))
        for suffix in ("csv", "md"):
            blobs = {(tmp_path / name / f"results.{suffix}").read_bytes() for name, _ in runs}
            assert len(blobs) == 1

    def test_single_replication_has_zero_se(self, tmp_path):
        result = run_benchmark(_config(tmp_path, n_replications=1, methods=["SW"]), write=False)
        assert result.rows[0].se_rel_mse == 0.0
        assert result.rows[0].n_reps == 1

    def test_standard_error_matches_replications(self, tmp_path):
        config = _config(tmp_path, n_replications=4, methods=["SW"])
        result = run_benchmark(config, write=False)
        values = [
            run_replication("DFM1", 30, 10, rep, 17, [MethodName.SW]).rel_mse[MethodName.SW]
            for rep in range(4)
        ]
        row = result.row("DFM1", 30, 10, "SW")
        assert row.mean_rel_mse == pytest.approx(np.mean(values), rel=1e-12)
        assert row.se_rel_mse == pytest.approx(np.std(values, ddof=1) / 2.0, rel=1e-12)

    def test_failures_flag_the_row(self, tmp_path):
        config = _config(tmp_path, T_values=[8], m_values=[4], n_replications=2)
        result = run_benchmark(config)
        fhlr = result.row("DFM1", 8, 4, "FHLR")
        assert fhlr.n_failed == 2
        assert fhlr.n_reps == 0
        assert fhlr.flagged
        assert result.n_failed == 2
        assert "Notes:" in (tmp_path / "results.md").read_text()


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

def _result() -> BenchResult:
    rows = []
    for scenario, T, m in [("DFM1", 100, 100), ("DFM1", 200, 400), ("DFM2", 100, 100)]:
        for i, method in enumerate(["GDPC", "FHLR", "SW"]):
            rows.append(BenchRow(
                scenario=scenario, T=T, m=m, method=method,
                mean_rel_mse=0.04 + 0.005 * i + 1 / 3 * 1e-3, se_rel_mse=1e-3, n_reps=300,
            ))
    return BenchResult(rows=rows)


class TestTables:
    def test_csv_round_trip(self, tmp_path):
        result = _result()
        path = emit_table(result, tmp_path / "t.csv", "csv")
        parsed = read_table(path)
        assert [r.model_dump(include=set(CSV_COLUMNS)) for r in parsed.rows] == [
            r.model_dump(include=set(CSV_COLUMNS)) for r in result.rows
        ]

    def test_markdown_layout(self, tmp_path):
        text = emit_table(_result(), tmp_path / "t.md", "markdown").read_text()
        assert text.index("### DFM1") < text.index("### DFM2")
        header = next(line for line in text.splitlines() if line.startswith("| T"))
        assert header.index("GDPC") < header.index("FHLR") < header.index("SW")
        assert "Notes:" not in text
        assert render_markdown(_result()) == text

    def test_empty_result(self, tmp_path):
        with pytest.raises(GDPCError):
            emit_table(BenchResult(), tmp_path / "t.csv")

    def test_unknown_format(self, tmp_path):
        with pytest.raises(GDPCError):
            emit_table(_result(), tmp_path / "t.txt", "html")

    def test_read_rejects_other_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(BenchmarkIOError):
            read_table(path)

    def test_read_missing_file(self, tmp_path):
        with pytest.raises(BenchmarkIOError):
            read_table(tmp_path / "missing.csv")


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

class TestBenchConfig:
    def test_defaults(self):
        config = BenchConfig(scenarios=["DFM1"], T_values=[100], m_values=[100])
        assert config.methods == [MethodName.GDPC, MethodName.FHLR, MethodName.SW]
        assert config.n_replications == 300
        assert config.parallelism == 1
        assert config.gdpc_options.tol == 1e-6

    def test_from_file_with_env_overrides(self, tmp_path, monkeypatch):
        path = tmp_path / "bench.json"
        path.write_text(json.dumps({
            "scenarios": ["DFM2AR"], "T_values": [50], "m_values": [20],
            "n_replications": 5, "gdpc_options": {"tol": 1e-8},
        }))
        monkeypatch.setenv("GDPC_BENCH_OUTPUT_PATH", str(tmp_path / "out.csv"))
        monkeypatch.setenv("GDPC_BENCH_PARALLELISM", "3")
        config = BenchConfig.from_file(path)
        assert config.scenarios == [ScenarioName.DFM2AR]
        assert config.output_path == str(tmp_path / "out.csv")
        assert config.parallelism == 3
        assert config.gdpc_options.tol == 1e-8

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bench.json"
        path.write_text("{not json")
        with pytest.raises(BenchmarkIOError):
            BenchConfig.from_file(path)

    def test_empty_grid(self, tmp_path, monkeypatch):
        monkeypatch.delenv("GDPC_BENCH_OUTPUT_PATH", raising=False)
        monkeypatch.delenv("GDPC_BENCH_PARALLELISM", raising=False)
        path = tmp_path / "bench.json"
        path.write_text(json.dumps({"scenarios": [], "T_values": [50], "m_values": [20]}))
        with pytest.raises(GDPCError):
            BenchConfig.from_file(path)

    def test_rejects_markdown_output_path(self, tmp_path):
        with pytest.raises(ValidationError):
            _config(tmp_path, output_path=str(tmp_path / "results.md"))

    def test_rejects_markdown_output_override(self, tmp_path, monkeypatch):
        path = tmp_path / "bench.json"
        path.write_text(json.dumps({"scenarios": ["DFM1"], "T_values": [50], "m_values": [20]}))
        monkeypatch.setenv("GDPC_BENCH_OUTPUT_PATH", str(tmp_path / "results.MD"))
        with pytest.raises(GDPCError):
            BenchConfig.from_file(path)


# ---------------------------------------------------------------------------
# Full simulation grid
# ---------------------------------------------------------------------------

FULL_GRID = Path(__file__).resolve().parents[1] / "configs" / "bench_full_grid.json"

REFERENCE = {
    ("DFM1", 100, 100): {"GDPC": 0.0406, "FHLR": 0.0495, "SW": 0.0508},
    ("DFM1", 200, 400): {"GDPC": 0.0176, "FHLR": 0.0204, "SW": 0.0201},
    ("DFM2", 100, 100): {"GDPC": 0.0552, "FHLR": 0.0684, "SW": 0.0727},
    ("DFM2", 200, 100): {"GDPC": 0.0319},
    ("DFM2AR", 200, 400): {"GDPC": 0.0310, "FHLR": 0.0364, "SW": 0.0351},
}
RELATIVE_BAND = {"GDPC": 0.10, "SW": 0.10, "FHLR": 0.25}


@pytest.fixture(scope="module")
def full_grid(tmp_path_factory) -> tuple[BenchConfig, BenchResult]:
    raw = json.loads(FULL_GRID.read_text(encoding="utf-8"))
    raw["output_path"] = str(tmp_path_factory.mktemp("grid") / "results.csv")
    config = BenchConfig.model_validate(raw)
    return config, run_benchmark(config)


@pytest.mark.slow
class TestFullGrid:
    @pytest.mark.parametrize("cell", list(REFERENCE))
    def test_means_match_reference(self, full_grid, cell):
        _, result = full_grid
        scenario, T, m = cell
        for method, expected in REFERENCE[cell].items():
            row = result.row(scenario, T, m, method)
            band = max(RELATIVE_BAND[method] * expected, 3 * row.se_rel_mse)
            assert abs(row.mean_rel_mse - expected) <= band, (method, row.mean_rel_mse)

    def test_no_failures_or_violations(self, full_grid):
        config, result = full_grid
        assert len(result.rows) == 24 * 3
        assert result.n_failed == 0
        assert result.n_violations == 0
        assert all(r.n_reps == config.n_replications for r in result.rows)

    def test_gdpc_is_generally_lowest(self, full_grid):
        config, result = full_grid
        wins = 0
        for scenario, T, m in itertools.product(config.scenarios, config.T_values, config.m_values):
            gdpc = result.row(scenario, T, m, "GDPC").mean_rel_mse
            fhlr = result.row(scenario, T, m, "FHLR").mean_rel_mse
            sw = result.row(scenario, T, m, "SW").mean_rel_mse
            wins += gdpc <= fhlr and gdpc <= sw
        assert wins >= 20

    @pytest.mark.parametrize("method", ["GDPC", "FHLR", "SW"])
    def test_error_decreases_with_sample_size(self, full_grid, method):
        config, result = full_grid
        for scenario in config.scenarios:
            for m in config.m_values:
                means = [result.row(scenario, T, m, method).mean_rel_mse for T in config.T_values]
                assert all(b < a for a, b in zip(means, means[1:])), (scenario, "T", m, means)
            for T in config.T_values:
                means = [result.row(scenario, T, m, method).mean_rel_mse for m in config.m_values]
                assert all(b < a for a, b in zip(means, means[1:])), (scenario, T, "m", means)

    def test_written_table_matches_result(self, full_grid):
        config, result = full_grid
        table = read_table(config.output_path)
        assert [(r.scenario, r.T, r.m, r.method, r.mean_rel_mse, r.se_rel_mse) for r in table.rows] == [
            (r.scenario, r.T, r.m, r.method, r.mean_rel_mse, r.se_rel_mse) for r in result.rows
        ]
        assert Path(config.output_path).with_suffix(".md").read_text().startswith("## Means")
