"""Command-line entry point for the HRQoL simulator."""
import asyncio
from pathlib import Path
from typing import List, Optional, Tuple

import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from core.config import RuntimeConfig, SimConfig
from core.mortality import gompertz_quantile
from core.models import PopulationSummary
from core.population import simulate_individual
from core.runner import create_runner
from core.streams import make_stream
from tools.config_loader import ConfigError, apply_overrides, load_config, render_config
from tools.writers import OutputError, write_path
from utils.tracing import set_quiet

# Load environment variables
load_dotenv()

EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3

# Published population statistics: (median, q25, q75) and the tolerance on the median.
REFERENCE_STATS = {
    "life_expectancy": ((83.19, 74.62, 88.63), 1.0),
    "hrqol_at_death": ((0.5797, 0.4402, 0.7050), 0.06),
    "haly": ((72.23, 66.43, 76.80), 1.5),
}
# External comparators, German women: life expectancy 2021, healthy life expectancy 2019.
GERMAN_WOMEN_LE = 83.2
WHO_HALE = 72.1
# check only reads summaries, which always use the full grid
CHECK_RECORD_EVERY = 100

app = typer.Typer(
    name="hrqol-sim",
    help="Monte Carlo simulator for health-related quality of life over the lifespan",
    add_completion=False
)

console = Console()
err_console = Console(stderr=True)


def _load(config_path: Optional[Path], seed: Optional[int], n: Optional[int]) -> SimConfig:
    """Config file (or defaults) with command-line overrides applied."""
    try:
        config = load_config(config_path) if config_path else SimConfig()
        return apply_overrides(config, seed=seed, n=n)
    except ConfigError as e:
        err_console.print(f"[red]Config error: {e}[/red]")
        raise typer.Exit(EXIT_CONFIG_ERROR)


def _runtime(
    quiet: bool,
    workers: Optional[int] = None,
    batch_size: Optional[int] = None,
    record_every: Optional[int] = None,
    timeout: Optional[float] = None,
) -> RuntimeConfig:
    """Environment runtime settings with command-line overrides applied."""
    try:
        runtime = RuntimeConfig.from_env()
        updates = {
            "workers": workers,
            "batch_size": batch_size,
            "record_every": record_every,
            "timeout_seconds": timeout,
        }
        updates = {key: value for key, value in updates.items() if value is not None}
        runtime = RuntimeConfig(**{**runtime.model_dump(), **updates, "quiet": quiet or runtime.quiet})
    except ValueError as e:
        err_console.print(f"[red]Config error: {e}[/red]")
        raise typer.Exit(EXIT_CONFIG_ERROR)
    set_quiet(runtime.quiet)
    return runtime


def _summary_rows(summary: PopulationSummary) -> List[Tuple[str, str, float, float, float]]:
    return [
        ("Age of death (years)", "life_expectancy", *_triple(summary.life_expectancy)),
        ("HRQoL at death", "hrqol_at_death", *_triple(summary.hrqol_at_death)),
        ("HALY (years)", "haly", *_triple(summary.haly)),
    ]


def _triple(triple) -> Tuple[float, float, float]:
    return triple.median, triple.q25, triple.q75


def _summary_table(summary: PopulationSummary) -> Table:
    table = Table(title=f"Population summary (n={summary.n}, censored={summary.censored})", show_header=True)
    table.add_column("Statistic", style="cyan")
    table.add_column("Median", justify="right")
    table.add_column("Q25", justify="right")
    table.add_column("Q75", justify="right")
    for label, _, median, q25, q75 in _summary_rows(summary):
        table.add_row(label, f"{median:.4f}", f"{q25:.4f}", f"{q75:.4f}")
    return table


def _run(runner, quiet: bool):
    if quiet:
        return asyncio.run(runner.run())
    with console.status("[bold green]Simulating population...", spinner="dots"):
        return asyncio.run(runner.run())


def _exit_for(outcome) -> None:
    if outcome.success:
        return
    if outcome.error_kind == "output":
        err_console.print(f"[red]I/O error: {outcome.error}[/red]")
        raise typer.Exit(EXIT_IO_ERROR)
    if outcome.error_kind == "timeout":
        err_console.print(f"[red]Timeout Error: {outcome.error}[/red]")
    else:
        err_console.print(f"[red]Error: {outcome.error}[/red]")
    raise typer.Exit(EXIT_FAILURE)


@app.command()
def simulate(
    config_path: Optional[Path] = typer.Option(
        None,
        "--config", "-c",
        help="YAML/JSON config document (defaults are used when omitted)"
    ),
    seed: Optional[int] = typer.Option(
        None,
        "--seed",
        min=0,
        help="Master seed, overrides the config document"
    ),
    n: Optional[int] = typer.Option(
        None,
        "--n",
        min=1,
        help="Population size, overrides the config document"
    ),
    out: Path = typer.Option(
        Path("results"),
        "--out", "-o",
        help="Directory for summary.json, curves.csv and individuals.csv"
    ),
    dump_paths: bool = typer.Option(
        False,
        "--dump-paths",
        help="Also write every stored path to paths.npz"
    ),
    workers: Optional[int] = typer.Option(
        None,
        "--workers", "-w",
        min=0,
        help="Worker processes (0 uses every CPU)"
    ),
    batch_size: Optional[int] = typer.Option(
        None,
        "--batch-size",
        min=1,
        help="Individuals advanced together in one batch"
    ),
    record_every: Optional[int] = typer.Option(
        None,
        "--record-every",
        min=1,
        help="Store every k-th grid point of each path"
    ),
    timeout: Optional[float] = typer.Option(
        None,
        "--timeout",
        help="Wall-clock limit in seconds"
    ),
    quiet: bool = typer.Option(
        False,
        "--quiet", "-q",
        help="Suppress progress output"
    )
):
    """Simulate a population and write its summary, curves and individuals."""
    runtime = _runtime(quiet, workers, batch_size, record_every, timeout)
    config = _load(config_path, seed, n)

    runner = create_runner(config, runtime=runtime, out_dir=out, dump_paths=dump_paths)
    outcome = _run(runner, runtime.quiet)
    _exit_for(outcome)

    if not runtime.quiet:
        console.print(_summary_table(outcome.result.summary))
        for name, path in outcome.written.items():
            console.print(f"[green]{name}:[/green] {path}")
        console.print(f"\n[dim]Execution time: {outcome.execution_time:.2f}s[/dim]")


@app.command()
def trace(
    index: int = typer.Option(
        0,
        "--index", "-i",
        min=0,
        help="Individual id; the path matches row <index> of a population run"
    ),
    config_path: Optional[Path] = typer.Option(
        None,
        "--config", "-c",
        help="YAML/JSON config document"
    ),
    seed: Optional[int] = typer.Option(
        None,
        "--seed",
        min=0,
        help="Master seed, overrides the config document"
    ),
    out: Optional[Path] = typer.Option(
        None,
        "--out", "-o",
        help="Write the stopped path as an age,hrqol CSV"
    ),
    quiet: bool = typer.Option(
        False,
        "--quiet", "-q",
        help="Suppress progress output"
    )
):
    """Simulate one individual and report its age of death and HALY."""
    set_quiet(quiet)
    config = _load(config_path, seed, None)

    trajectory = simulate_individual(config, make_stream(config.seed, index), index=index)
    if out:
        try:
            write_path(trajectory, out)
        except OutputError as e:
            err_console.print(f"[red]I/O error: {e}[/red]")
            raise typer.Exit(EXIT_IO_ERROR)

    if not quiet:
        status = "censored at omega" if trajectory.censored else "died"
        console.print(Panel(
            f"[bold]Age of death:[/bold] {trajectory.tau:.2f} ({status})\n"
            f"[bold]HRQoL at death:[/bold] {trajectory.x_at_death:.4f}\n"
            f"[bold]HALY:[/bold] {trajectory.haly:.2f}",
            title=f"Individual {index} (seed {config.seed})",
            border_style="blue"
        ))


@app.command()
def check(
    n: int = typer.Option(
        10_000,
        "--n",
        min=1,
        help="Population size"
    ),
    seed: Optional[int] = typer.Option(
        None,
        "--seed",
        min=0,
        help="Master seed"
    ),
    workers: Optional[int] = typer.Option(
        None,
        "--workers", "-w",
        min=0,
        help="Worker processes (0 uses every CPU)"
    ),
    quiet: bool = typer.Option(
        False,
        "--quiet", "-q",
        help="Suppress progress output"
    )
):
    """Compare the default model against the published population statistics."""
    runtime = _runtime(quiet, workers, record_every=CHECK_RECORD_EVERY)
    config = _load(None, seed, n)

    outcome = _run(create_runner(config, runtime=runtime), runtime.quiet)
    _exit_for(outcome)
    summary = outcome.result.summary

    table = Table(title=f"Reference check (n={n}, seed={config.seed})", show_header=True)
    table.add_column("Statistic", style="cyan")
    table.add_column("Simulated [IQR]", justify="right")
    table.add_column("Reference [IQR]", justify="right")
    table.add_column("Status")

    failures = []
    for label, key, median, q25, q75 in _summary_rows(summary):
        (ref_median, ref_q25, ref_q75), tolerance = REFERENCE_STATS[key]
        ok = abs(median - ref_median) <= tolerance
        if not ok:
            failures.append(label)
        table.add_row(
            label,
            f"{median:.4f} [{q25:.4f}, {q75:.4f}]",
            f"{ref_median:.4f} [{ref_q25:.4f}, {ref_q75:.4f}]",
            "[green]✓ within ±{0}[/green]".format(tolerance) if ok else "[red]✗ off[/red]"
        )
    console.print(table)

    frozen_median = gompertz_quantile(0.5, config.x0, config.hazard)
    console.print(Panel(
        f"Life expectancy, German women 2021: {GERMAN_WOMEN_LE}\n"
        f"Healthy life expectancy (WHO), German women 2019: {WHO_HALE}\n"
        f"Median age of death with HRQoL frozen at x0={config.x0}: {frozen_median:.2f}",
        title="Comparators",
        border_style="blue"
    ))

    if failures:
        err_console.print(f"[red]Outside tolerance: {', '.join(failures)}[/red]")
        raise typer.Exit(EXIT_FAILURE)


@app.command()
def example():
    """Print the default config document."""
    console.print(render_config(SimConfig()), markup=False, highlight=False, soft_wrap=True, end="")


if __name__ == "__main__":
    app()
