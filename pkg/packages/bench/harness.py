"""Monte Carlo harness — replications over designs, sizes and methods, aggregated into a results table.

Each replication is an independent task keyed by (scenario, T, m, rep_index);
its seed is derived deterministically from the base seed, so the aggregate
numbers do not depend on how many worker processes run the tasks.
"""
from __future__ import annotations

import itertools
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from estimators.fhlr.estimator import fit_fhlr
from estimators.gdpc.estimator import common_part, fit_gdpc
from estimators.sw.estimator import fit_sw
from gdpc_shared.errors import BenchmarkIOError, GDPCError
from gdpc_shared.models import CommonPartEstimate, GdpcOptions, MethodName, ScenarioName
from gdpc_shared.timeseries import data_mse, relative_frobenius_error, spectral_norm
from gdpc_shared.utils.formatters import Fmt
from gdpc_shared.utils.rng import MASK64, splitmix64
from packages.simulator.dfm import DfmScenario, get_scenario, simulate_panel

logger = logging.getLogger("gdpc.bench")

CSV_COLUMNS = ["scenario", "T", "m", "method", "mean_rel_mse", "se_rel_mse", "n_reps"]
INEQUALITY_SLACK = 1e-10
FAILURE_FLAG_SHARE = 0.05
METHOD_ORDER = [MethodName.GDPC, MethodName.FHLR, MethodName.SW]


# ---------------------------------------------------------------------------
# Config and result models
# ---------------------------------------------------------------------------

class BenchConfig(BaseModel):
    """Monte Carlo study definition, loadable from JSON."""
    model_config = ConfigDict(populate_by_name=True)

    scenarios: list[ScenarioName]
    T_values: list[int]
    m_values: list[int]
    methods: list[MethodName] = Field(default_factory=lambda: list(METHOD_ORDER))
    n_replications: int = Field(default=300, ge=1)
    base_seed: int = Field(default=20240101, ge=0, le=MASK64)
    output_path: str = "bench_results.csv"
    gdpc_options: GdpcOptions = Field(default_factory=GdpcOptions)
    parallelism: int = Field(default=1, ge=1)

    @field_validator("scenarios", "T_values", "m_values", "methods")
    @classmethod
    def _non_empty(cls, v: list) -> list:
        if not v:
            raise ValueError("must not be empty")
        return v

    @field_validator("output_path")
    @classmethod
    def _csv_path(cls, v: str) -> str:
        # the markdown table goes next to the CSV with the .md suffix
        if Path(v).suffix.lower() == ".md":
            raise ValueError("output_path names the CSV table and must not end in .md")
        return v

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> BenchConfig:
        """Load JSON config, then apply GDPC_BENCH_OUTPUT_PATH / GDPC_BENCH_PARALLELISM."""
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise BenchmarkIOError(str(path), f"cannot read config: {e}") from e
        if os.getenv("GDPC_BENCH_OUTPUT_PATH"):
            raw["output_path"] = os.getenv("GDPC_BENCH_OUTPUT_PATH")
        if os.getenv("GDPC_BENCH_PARALLELISM"):
            raw["parallelism"] = int(os.getenv("GDPC_BENCH_PARALLELISM", "1"))
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise GDPCError(f"Invalid benchmark config {path}", details=str(e)) from e


class BenchRow(BaseModel):
    scenario: ScenarioName
    T: int
    m: int
    method: MethodName
    mean_rel_mse: float = Field(ge=0.0)
    se_rel_mse: float = Field(ge=0.0)
    n_reps: int
    n_failed: int = 0
    n_violations: int = 0
    flagged: bool = False
    wall_time: float = 0.0


class BenchResult(BaseModel):
    rows: list[BenchRow] = Field(default_factory=list)

    @property
    def n_failed(self) -> int:
        return sum(r.n_failed for r in self.rows)

    @property
    def n_violations(self) -> int:
        return sum(r.n_violations for r in self.rows)

    def row(self, scenario: ScenarioName | str, T: int, m: int, method: MethodName | str) -> BenchRow:
        for r in self.rows:
            if (r.scenario, r.T, r.m, r.method) == (ScenarioName(scenario), T, m, MethodName(method)):
                return r
        raise KeyError((scenario, T, m, method))


# ---------------------------------------------------------------------------
# Replication
# ---------------------------------------------------------------------------

@dataclass
class ReplicationOutcome:
    rel_mse: dict[MethodName, float] = field(default_factory=dict)
    data_mse: dict[MethodName, float] = field(default_factory=dict)
    failures: dict[MethodName, str] = field(default_factory=dict)
    fit_seconds: dict[MethodName, float] = field(default_factory=dict)
    idio_mean_square: float = float("nan")
    gdpc_below_idio: Optional[bool] = None
    sw_below_gdpc: Optional[bool] = None

    @property
    def violations(self) -> int:
        return int(self.gdpc_below_idio is False) + int(self.sw_below_gdpc is False)


def derive_replication_seed(
    base_seed: int, scenario: DfmScenario, T: int, m: int, rep_index: int
) -> int:
    h = splitmix64(scenario.scenario_id)
    h = splitmix64(h ^ T)
    h = splitmix64(h ^ m)
    h = splitmix64(h ^ rep_index)
    return splitmix64((base_seed ^ h) & MASK64)


def _fit_method(method: MethodName, Z: np.ndarray, k: int, opts: GdpcOptions) -> CommonPartEstimate:
    if method == MethodName.GDPC:
        return common_part(fit_gdpc(Z, k, opts))
    if method == MethodName.SW:
        return fit_sw(Z, k + 1)
    return fit_fhlr(Z, 1, k + 1)


def run_replication(
    scenario: DfmScenario | ScenarioName | str,
    T: int,
    m: int,
    rep_index: int,
    base_seed: int,
    methods: Iterable[MethodName],
    gdpc_opts: Optional[GdpcOptions] = None,
    noise_scale: float = 1.0,
) -> ReplicationOutcome:
    """Simulate one panel, fit each method, score against the true common part."""
    if not isinstance(scenario, DfmScenario):
        scenario = get_scenario(scenario)
    opts = gdpc_opts or GdpcOptions()
    seed = derive_replication_seed(base_seed, scenario, T, m, rep_index)
    panel = simulate_panel(scenario, T, m, seed, noise_scale=noise_scale)
    Z = panel.Z.values
    outcome = ReplicationOutcome(idio_mean_square=float(np.mean(panel.e * panel.e)))

    for method in methods:
        method = MethodName(method)
        start = time.perf_counter()
        try:
            estimate = _fit_method(method, Z, scenario.k, opts)
        except GDPCError as e:
            outcome.failures[method] = f"{type(e).__name__}: {e.message}"
            logger.warning(
                "%s failed on %s T=%d m=%d rep=%d: %s",
                method.value, scenario.name.value, T, m, rep_index, e.message,
            )
            continue
        outcome.fit_seconds[method] = time.perf_counter() - start
        outcome.rel_mse[method] = relative_frobenius_error(panel.chi, estimate.chi_hat)
        outcome.data_mse[method] = data_mse(Z, estimate.chi_hat)

    gdpc = outcome.data_mse.get(MethodName.GDPC)
    if gdpc is not None:
        bound = outcome.idio_mean_square
        outcome.gdpc_below_idio = gdpc <= bound * (1.0 + INEQUALITY_SLACK)
        sw = outcome.data_mse.get(MethodName.SW)
        if sw is not None:
            outcome.sw_below_gdpc = sw <= gdpc * (1.0 + INEQUALITY_SLACK)
    if outcome.violations:
        logger.warning(
            "Inequality violated on %s T=%d m=%d rep=%d (gdpc<=idio: %s, sw<=gdpc: %s)",
            scenario.name.value, T, m, rep_index, outcome.gdpc_below_idio, outcome.sw_below_gdpc,
        )
    return outcome


def _run_task(args: tuple) -> ReplicationOutcome:
    return run_replication(*args)


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

def _aggregate(values: list[float]) -> tuple[float, float]:
    n = len(values)
    if n == 0:
        return float("nan"), float("nan")
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


def run_benchmark(config: BenchConfig, write: bool = True) -> BenchResult:
    """Run every (scenario, T, m) cell for n_replications and aggregate per method."""
    cells = list(itertools.product(config.scenarios, config.T_values, config.m_values))
    methods = [m for m in METHOD_ORDER if m in config.methods]
    tasks = [
        (get_scenario(s), T, m, rep, config.base_seed, methods, config.gdpc_options)
        for s, T, m in cells
        for rep in range(config.n_replications)
    ]
    logger.info(
        "Benchmark: %d cells x %d replications, methods=%s, parallelism=%d",
        len(cells), config.n_replications, [m.value for m in methods], config.parallelism,
    )
    start = time.perf_counter()
    if config.parallelism == 1:
        outcomes = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=max(1, config.n_replications // 4)))
    logger.info("Benchmark finished in %s", Fmt.seconds(time.perf_counter() - start))

    rows: list[BenchRow] = []
    n = config.n_replications
    for i, (scenario, T, m) in enumerate(cells):
        chunk = outcomes[i * n: (i + 1) * n]
        violations = sum(o.violations for o in chunk)
        for method in methods:
            values = [o.rel_mse[method] for o in chunk if method in o.rel_mse]
            failed = n - len(values)
            mean, se = _aggregate(values)
            if not values:
                mean, se = 0.0, 0.0
            rows.append(BenchRow(
                scenario=scenario,
                T=T,
                m=m,
                method=method,
                mean_rel_mse=mean,
                se_rel_mse=se,
                n_reps=len(values),
                n_failed=failed,
                n_violations=violations if method == MethodName.GDPC else 0,
                flagged=failed > FAILURE_FLAG_SHARE * n,
                wall_time=sum(o.fit_seconds.get(method, 0.0) for o in chunk),
            ))
    result = BenchResult(rows=rows)
    if write:
        emit_table(result, config.output_path, "csv")
        emit_table(result, str(Path(config.output_path).with_suffix(".md")), "markdown")
    return result


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def render_markdown(result: BenchResult) -> str:
    """Scenario blocks with T/m rows and methods as columns (GDPC, FHLR, SW)."""
    lines = ["## Means of the normalized MSEs of the estimation of the common part", ""]
    scenarios = list(dict.fromkeys(r.scenario for r in result.rows))
    for scenario in scenarios:
        block = [r for r in result.rows if r.scenario == scenario]
        methods = [m for m in METHOD_ORDER if any(r.method == m for r in block)]
        sizes = list(dict.fromkeys((r.T, r.m) for r in block))
        table_rows = []
        for T, m in sizes:
            row: list = [T, m]
            for method in methods:
                match = [r for r in block if (r.T, r.m, r.method) == (T, m, method)]
                row.append(Fmt.num(match[0].mean_rel_mse) if match else "—")
            table_rows.append(row)
        lines += [f"### {scenario.value}", "", Fmt.md_table(["T", "m", *[m.value for m in methods]], table_rows), ""]
    flagged = [r for r in result.rows if r.flagged or r.n_violations]
    if flagged:
        lines.append("Notes:")
        for r in flagged:
            lines.append(
                f"- {r.scenario.value} T={r.T} m={r.m} {r.method.value}: "
                f"{r.n_failed} failed, {r.n_violations} inequality violations"
            )
    return "\n".join(lines) + "\n"


def emit_table(result: BenchResult, path: Union[str, Path], fmt: str = "csv") -> Path:
    """Write the result as CSV (fixed columns) or markdown."""
    if not result.rows:
        raise GDPCError("Cannot emit an empty benchmark result")
    path = Path(path)
    try:
        if fmt == "csv":
            frame = pd.DataFrame(
                [[r.scenario.value, r.T, r.m, r.method.value, r.mean_rel_mse, r.se_rel_mse, r.n_reps]
                 for r in result.rows],
                columns=CSV_COLUMNS,
            )
            frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        elif fmt == "markdown":
            path.write_text(render_markdown(result), encoding="utf-8")
        else:
            raise GDPCError(f"Unknown table format '{fmt}'")
    except OSError as e:
        raise BenchmarkIOError(str(path), f"cannot write table: {e}") from e
    logger.info("Wrote %s table %s (%d rows)", fmt, path, len(result.rows))
    return path


def read_table(path: Union[str, Path]) -> BenchResult:
    """Parse a CSV written by ``emit_table``."""
    try:
        frame = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError) as e:
        raise BenchmarkIOError(str(path), f"cannot read table: {e}") from e
    if list(frame.columns) != CSV_COLUMNS:
        raise BenchmarkIOError(str(path), f"unexpected columns {list(frame.columns)}")
    rows = [
        BenchRow(
            scenario=rec.scenario,
            T=int(rec.T),
            m=int(rec.m),
            method=rec.method,
            mean_rel_mse=float(rec.mean_rel_mse),
            se_rel_mse=float(rec.se_rel_mse),
            n_reps=int(rec.n_reps),
        )
        for rec in frame.itertuples(index=False)
    ]
    return BenchResult(rows=rows)


# ---------------------------------------------------------------------------
# Idiosyncratic norm trend
# ---------------------------------------------------------------------------

def idiosyncratic_norm_trend(
    scenario: ScenarioName | str,
    sizes: Iterable[int] = (25, 100, 400),
    n_seeds: int = 50,
    base_seed: int = 0,
) -> dict[int, float]:
    """Median ||E|| / sqrt(T m) over seeds, with T = m = n for each size n."""
    spec = get_scenario(scenario)
    medians: dict[int, float] = {}
    for n in sizes:
        ratios = []
        for rep in range(n_seeds):
            panel = simulate_panel(spec, n, n, derive_replication_seed(base_seed, spec, n, n, rep))
            ratios.append(spectral_norm(panel.e) / np.sqrt(n * n))
        medians[n] = float(np.median(ratios))
        logger.info("norm trend %s n=%d: median ratio %.5f", spec.name.value, n, medians[n])
    return medians
