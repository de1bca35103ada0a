"""Rich UI components for terminal output."""

import math
from typing import Optional

from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
)
from rich.table import Table

from .models import EvaluationStatus, RunRecord, RunStatus
from .utils import format_duration

console = Console()


def create_progress_bar(description: str = "Evaluating pulses") -> Progress:
    """
    Create a Rich progress bar for tracking evaluations.

    Args:
        description: Description to display

    Returns:
        Progress: Configured Rich Progress object
    """
    return Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
    )


def _number(value: float) -> str:
    return "n/a" if value is None or math.isnan(value) else f"{value:.4e}"


def create_summary_table(record: RunRecord) -> Table:
    """
    Create a Rich table summarizing a run.

    Args:
        record: Finished run record

    Returns:
        Table: Formatted Rich Table
    """
    status_style = {
        RunStatus.SUCCESS: "[green]✓ success[/green]",
        RunStatus.HALTED: "[cyan]■ halted at threshold[/cyan]",
        RunStatus.BUDGET_EXHAUSTED: "[yellow]⏱ budget exhausted[/yellow]",
    }.get(record.status, "[white]unknown[/white]")

    table = Table(title=f"{record.experiment.value} ({record.config_hash})", show_header=False)
    table.add_column("Field", style="cyan", no_wrap=True)
    table.add_column("Value", style="white")
    table.add_row("Status", status_style)
    if record.evaluation_trace:
        failed = sum(1 for e in record.evaluation_trace if e.status is not EvaluationStatus.SUCCESS)
        table.add_row("Evaluations", f"{len(record.evaluation_trace)} ({failed} failed)")
        wall = sum(e.wall_time for e in record.evaluation_trace)
        table.add_row("Evaluation time", format_duration(wall))
    table.add_row("Defect density", _number(record.best_defect_density))
    table.add_row("Residual energy / site", _number(record.best_residual_energy))
    if record.ground_reference:
        table.add_row("E_G from", record.ground_reference)
    if record.truncation_summary.get("evolutions"):
        weight = record.truncation_summary.get("max_discarded_weight")
        table.add_row("Max discarded weight", _number(weight))
    table.add_row("Seed", str(record.seed))
    return table


def create_study_table(name: str, rows: list) -> Optional[Table]:
    """Render one study table (robustness, baselines, ...) or None if it is empty."""
    if not rows:
        return None
    table = Table(title=name, show_header=True, header_style="bold magenta")
    columns = [c for c in rows[0] if c != "error"]
    for column in columns:
        table.add_column(column, justify="right")
    for row in rows:
        cells = []
        for column in columns:
            value = row[column]
            cells.append(f"{value:.4e}" if isinstance(value, float) else str(value))
        table.add_row(*cells)
    return table


def print_error(message: str) -> None:
    """Print an error message in red."""
    console.print(f"[bold red]ERROR:[/bold red] {message}")


def print_success(message: str) -> None:
    """Print a success message in green."""
    console.print(f"[bold green]SUCCESS:[/bold green] {message}")


def print_warning(message: str) -> None:
    """Print a warning message in yellow."""
    console.print(f"[bold yellow]WARNING:[/bold yellow] {message}")
