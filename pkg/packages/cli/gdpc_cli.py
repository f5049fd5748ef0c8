"""gdpc-cli — fit, simulate and benchmark common-part estimators.

Commands:
    gdpc-cli fit         Fit GDPC / SW / FHLR to a CSV panel
    gdpc-cli simulate    Draw a panel from one of the simulation designs
    gdpc-cli benchmark   Run the Monte Carlo study from a JSON config
    gdpc-cli norm-trend  Median ||E||/sqrt(Tm) across panel sizes
"""
from __future__ import annotations

import logging
import os
import sys
from typing import Optional

import click

from estimators.fhlr.estimator import fit_fhlr
from estimators.gdpc.estimator import common_part, fit_gdpc
from estimators.sw.estimator import fit_sw
from gdpc_shared.errors import GDPCError
from gdpc_shared.models import GdpcOptions, MethodName, ScenarioName
from gdpc_shared.utils.formatters import Fmt
from gdpc_shared.utils.panel_io import read_panel, write_panel, write_vector
from packages.bench.harness import BenchConfig, idiosyncratic_norm_trend, run_benchmark
from packages.simulator.dfm import simulate_panel

logger = logging.getLogger("gdpc.cli")


def _fail(err: GDPCError) -> None:
    click.secho(f"❌ {err.to_cli_error()}", fg="red", err=True)
    sys.exit(1)


# ---------------------------------------------------------------------------
# CLI Root
# ---------------------------------------------------------------------------

@click.group()
@click.version_option("1.0.0", prog_name="gdpc-cli")
@click.option("--verbose", "-v", is_flag=True, help="Log progress at INFO level")
def cli(verbose: bool):
    """GDPC — generalized dynamic principal components and factor-model baselines."""
    level = "INFO" if verbose else os.getenv("GDPC_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")


# ---------------------------------------------------------------------------
# Fit
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice([m.value.lower() for m in MethodName]), default="gdpc")
@click.option("--k", type=int, default=1, show_default=True, help="GDPC lags")
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--max-iter", type=int, default=500, show_default=True)
@click.option("--single-start", is_flag=True, help="GDPC: skip the shifted principal component starts")
@click.option("--r", type=int, default=None, help="Static factors (SW, FHLR); default k+1")
@click.option("--q", type=int, default=1, show_default=True, help="Dynamic factors (FHLR)")
@click.option("--output-reconstruction", type=click.Path(dir_okay=False), required=True)
@click.option("--output-factor", type=click.Path(dir_okay=False), default=None, help="GDPC only")
def fit(
    input_path: str,
    method: str,
    k: int,
    tol: float,
    max_iter: int,
    single_start: bool,
    r: Optional[int],
    q: int,
    output_reconstruction: str,
    output_factor: Optional[str],
):
    """Fit an estimator and write the reconstructed common part."""
    try:
        panel = read_panel(input_path)
        chosen = MethodName(method.upper())
        if chosen == MethodName.GDPC:
            result = fit_gdpc(panel, k, GdpcOptions(tol=tol, max_iter=max_iter, shifted_starts=not single_start))
            estimate = common_part(result)
            if output_factor:
                write_vector(output_factor, result.f, "f")
            click.echo(
                f"{Fmt.status_dot(result.converged)} GDPC k={k}: mse={result.mse:.6g}, "
                f"{result.iterations} iterations"
            )
        elif chosen == MethodName.SW:
            estimate = fit_sw(panel, r or k + 1)
            click.echo(f"SW r={estimate.r}: explained variance {Fmt.num(estimate.diagnostics['explained_variance'])}")
        else:
            estimate = fit_fhlr(panel, q, r or k + 1)
            click.echo(f"FHLR q={q} r={estimate.r}: M={estimate.diagnostics['M']}")
        write_panel(output_reconstruction, estimate.chi_hat, names=panel.names)
    except GDPCError as e:
        _fail(e)
    except ValueError as e:
        _fail(GDPCError("Invalid options", details=str(e)))


# ---------------------------------------------------------------------------
# Simulate
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--scenario", type=click.Choice([s.value for s in ScenarioName]), required=True)
@click.option("--t", "T", type=int, required=True)
@click.option("--m", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-z", type=click.Path(dir_okay=False), required=True)
@click.option("--out-chi", type=click.Path(dir_okay=False), default=None)
def simulate(scenario: str, T: int, m: int, seed: int, out_z: str, out_chi: Optional[str]):
    """Draw one panel from a simulation design."""
    try:
        panel = simulate_panel(scenario, T, m, seed)
        write_panel(out_z, panel.Z)
        if out_chi:
            write_panel(out_chi, panel.chi, names=panel.Z.names)
    except GDPCError as e:
        _fail(e)
    click.echo(f"{scenario}: T={T} m={m} seed={seed} c={panel.c:.6g}")


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
def benchmark(config_path: str):
    """Run the Monte Carlo study; exit 1 if any replication failed."""
    try:
        config = BenchConfig.from_file(config_path)
        result = run_benchmark(config)
    except GDPCError as e:
        _fail(e)
    for row in result.rows:
        ok = not row.flagged and row.n_failed == 0 and row.n_violations == 0
        click.echo(
            f"  {Fmt.status_dot(ok)} {row.scenario.value:<7} T={row.T:<4} m={row.m:<4} "
            f"{row.method.value:<5} {Fmt.num(row.mean_rel_mse)} ± {Fmt.num(row.se_rel_mse)} "
            f"({Fmt.seconds(row.wall_time)})"
        )
    click.echo(f"Results written to {config.output_path}")
    if result.n_failed or result.n_violations:
        click.secho(
            f"❌ {result.n_failed} failed fits, {result.n_violations} inequality violations",
            fg="red",
        )
        sys.exit(1)
    click.secho("✅ All replications succeeded.", fg="green")


# ---------------------------------------------------------------------------
# Norm trend
# ---------------------------------------------------------------------------

@cli.command("norm-trend")
@click.option("--scenario", type=click.Choice([s.value for s in ScenarioName]), default="DFM1")
@click.option("--sizes", default="25,100,400", show_default=True, help="Comma-separated T = m values")
@click.option("--seeds", type=int, default=50, show_default=True)
@click.option("--base-seed", type=int, default=0, show_default=True)
def norm_trend(scenario: str, sizes: str, seeds: int, base_seed: int):
    """Median spectral norm of the idiosyncratic part over sqrt(Tm)."""
    ns = [int(s) for s in sizes.split(",") if s.strip()]
    medians = idiosyncratic_norm_trend(scenario, ns, seeds, base_seed)
    click.echo(Fmt.md_table(["n", "median ||E||/sqrt(Tm)"], [[n, f"{v:.5f}"] for n, v in medians.items()]))
    values = list(medians.values())
    if any(b >= a for a, b in zip(values, values[1:])):
        click.secho("❌ Medians are not strictly decreasing.", fg="red")
        sys.exit(1)


if __name__ == "__main__":
    cli()
