"""
Command-line interface for crab-mott.

This module provides the CLI entry point using Typer for argument parsing and
Rich for console output. Each experiment is a subcommand; ``check`` validates a
configuration file without computing anything.

Exit codes: 0 success, 2 halted at the defect threshold, 3 budget exhausted, 1 error.
"""

import logging
import sys
from pathlib import Path
from typing import List, Optional

try:
    import typer
    from rich.console import Console
    from rich.logging import RichHandler
except ImportError as e:
    print(f"Error: Required package not installed: {e}")
    print("Please install with: pip install typer rich")
    sys.exit(1)

from . import __version__
from .config import build_config
from .exceptions import CrabError
from .experiments import run
from .models import ExperimentKind
from .ui import (
    create_progress_bar,
    create_study_table,
    create_summary_table,
    print_error,
    print_success,
    print_warning,
)

app = typer.Typer(
    name="crab-mott",
    help=(
        "CRAB optimal control of the superfluid to Mott-insulator ramp "
        "in the 1D Bose-Hubbard model"
    ),
    add_completion=False,
)
console = Console()
logger = logging.getLogger("crab_mott")

ConfigOption = typer.Option(
    None,
    "--config",
    "-c",
    help="YAML or JSON run configuration",
    exists=True,
    dir_okay=False,
    readable=True,
)
SeedOption = typer.Option(None, "--seed", help="Optimizer seed (overrides optimizer.seed)")
BackendOption = typer.Option(None, "--backend", "-b", help="Simulation backend (exact, mps)")
OutOption = typer.Option(None, "--out", "-o", help="Run directory (overrides output_dir)")
WorkersOption = typer.Option(
    None, "--workers", "-w", min=1, help="Concurrent evaluations (env CRAB_MOTT_WORKERS)"
)
SetOption = typer.Option(
    None, "--set", help="Override any config field, e.g. --set model.n_sites=10"
)
PulseRecordOption = typer.Option(
    None,
    "--pulse-record",
    help="record.json or run directory holding the pulse to study",
    exists=True,
)
VerboseOption = typer.Option(False, "--verbose", help="Debug logging")


def setup_logging(verbose: bool = False) -> None:
    """Route log records through Rich; package logs at INFO (DEBUG with --verbose)."""
    root = logging.getLogger()
    if not any(isinstance(h, RichHandler) for h in root.handlers):
        root.addHandler(RichHandler(console=console, show_path=False, rich_tracebacks=True))
    root.setLevel(logging.WARNING)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    logging.captureWarnings(True)


def _run_experiment(
    experiment: ExperimentKind,
    config_file: Optional[Path],
    seed: Optional[int],
    backend: Optional[str],
    out: Optional[Path],
    workers: Optional[int],
    overrides: Optional[List[str]],
    pulse_record: Optional[Path] = None,
    verbose: bool = False,
) -> None:
    setup_logging(verbose)
    try:
        config = build_config(
            path=config_file,
            overrides=overrides or [],
            experiment=experiment.value,
            seed=seed,
            backend=backend,
            output_dir=out,
            workers=workers,
            pulse_record=pulse_record,
        )
        console.print(
            f"[bold cyan]{experiment.value}[/bold cyan] config {config.hash()} "
            f"-> {config.output_path}"
        )

        with create_progress_bar() as progress:
            task = progress.add_task(experiment.value, total=None)

            def on_progress(completed: int, total: int) -> None:
                progress.update(task, completed=completed, total=total)

            record = run(config, on_progress=on_progress)

        console.print()
        console.print(create_summary_table(record))
        for name, rows in record.tables.items():
            table = create_study_table(name, rows)
            if table is not None:
                console.print(table)
        print_success(f"Run written to: {config.output_path}")
    except FileNotFoundError as e:
        print_error(f"File not found: {e}")
        raise typer.Exit(code=1)
    except ValueError as e:
        print_error(f"Invalid input: {e}")
        raise typer.Exit(code=1)
    except CrabError as e:
        print_error(f"Run failed: {e}")
        raise typer.Exit(code=1)
    except KeyboardInterrupt:
        print_warning("\nOperation cancelled by user")
        raise typer.Exit(code=130)

    raise typer.Exit(code=record.status.exit_code)


@app.command()
def optimize(
    config_file: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    backend: Optional[str] = BackendOption,
    out: Optional[Path] = OutOption,
    workers: Optional[int] = WorkersOption,
    overrides: Optional[List[str]] = SetOption,
    verbose: bool = VerboseOption,
):
    """Optimize a CRAB pulse from the configured guess."""
    _run_experiment(
        ExperimentKind.OPTIMIZE, config_file, seed, backend, out, workers, overrides, None, verbose
    )


@app.command("evaluate-pulse")
def evaluate_pulse(
    config_file: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    backend: Optional[str] = BackendOption,
    out: Optional[Path] = OutOption,
    workers: Optional[int] = WorkersOption,
    overrides: Optional[List[str]] = SetOption,
    pulse_record: Optional[Path] = PulseRecordOption,
    verbose: bool = VerboseOption,
):
    """Evaluate one pulse (a recorded best pulse, or the uncorrected guess)."""
    _run_experiment(
        ExperimentKind.EVALUATE_PULSE,
        config_file,
        seed,
        backend,
        out,
        workers,
        overrides,
        pulse_record,
        verbose,
    )


@app.command("robustness-sweep")
def robustness_sweep(
    config_file: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    backend: Optional[str] = BackendOption,
    out: Optional[Path] = OutOption,
    workers: Optional[int] = WorkersOption,
    overrides: Optional[List[str]] = SetOption,
    pulse_record: Optional[Path] = PulseRecordOption,
    verbose: bool = VerboseOption,
):
    """Apply a fixed pulse to lattices of N0 + dN sites at constant filling."""
    _run_experiment(
        ExperimentKind.ROBUSTNESS_SWEEP,
        config_file,
        seed,
        backend,
        out,
        workers,
        overrides,
        pulse_record,
        verbose,
    )


@app.command("baseline-guesses")
def baseline_guesses(
    config_file: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    backend: Optional[str] = BackendOption,
    out: Optional[Path] = OutOption,
    workers: Optional[int] = WorkersOption,
    overrides: Optional[List[str]] = SetOption,
    pulse_record: Optional[Path] = PulseRecordOption,
    verbose: bool = VerboseOption,
):
    """Compare the unoptimized guesses and a pulse transferred from a smaller lattice."""
    _run_experiment(
        ExperimentKind.BASELINE_GUESSES,
        config_file,
        seed,
        backend,
        out,
        workers,
        overrides,
        pulse_record,
        verbose,
    )


@app.command("convergence-study")
def convergence_study(
    config_file: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    backend: Optional[str] = BackendOption,
    out: Optional[Path] = OutOption,
    workers: Optional[int] = WorkersOption,
    overrides: Optional[List[str]] = SetOption,
    pulse_record: Optional[Path] = PulseRecordOption,
    verbose: bool = VerboseOption,
):
    """Re-evaluate a fixed pulse over bond dimension, time step and n_max (mps backend)."""
    _run_experiment(
        ExperimentKind.CONVERGENCE_STUDY,
        config_file,
        seed,
        backend,
        out,
        workers,
        overrides,
        pulse_record,
        verbose,
    )


@app.command("distortion-study")
def distortion_study(
    config_file: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    backend: Optional[str] = BackendOption,
    out: Optional[Path] = OutOption,
    workers: Optional[int] = WorkersOption,
    overrides: Optional[List[str]] = SetOption,
    pulse_record: Optional[Path] = PulseRecordOption,
    verbose: bool = VerboseOption,
):
    """Re-evaluate a fixed pulse under amplitude errors and smooth noise."""
    _run_experiment(
        ExperimentKind.DISTORTION_STUDY,
        config_file,
        seed,
        backend,
        out,
        workers,
        overrides,
        pulse_record,
        verbose,
    )


@app.command()
def check(
    config_file: Path = typer.Argument(
        ..., help="Configuration file to validate", exists=True, dir_okay=False
    ),
    overrides: Optional[List[str]] = SetOption,
):
    """Validate a configuration file and print its hash."""
    try:
        config = build_config(path=config_file, overrides=overrides or [])
        config.lattice_params()
        config.pulse_spec()
    except (ValueError, CrabError) as e:
        print_error(f"Invalid configuration: {e}")
        raise typer.Exit(code=1)
    print_success(f"{config_file} is valid ({config.experiment}, hash {config.hash()})")


@app.command()
def version():
    """Print version and exit."""
    typer.echo(f"crab-mott version {__version__}")


if __name__ == "__main__":
    app()
