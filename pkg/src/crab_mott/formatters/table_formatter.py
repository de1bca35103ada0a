"""Tab-separated table formatters for traces, pulses, profiles and study results.

Every table starts with ``# key: value`` header lines carrying the config hash.
Floats are written with repr, so identical runs give byte-identical tables.
"""

import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..exceptions import RecordMismatchError
from ..models import RunRecord
from ..pulse import display_depths, render_guess
from ..utils import format_float
from .base import BaseFormatter


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if value is None:
        return ""
    return str(value)


def format_table(
    columns: Sequence[str], rows: Sequence[Sequence], header: Optional[dict] = None
) -> str:
    """Render rows as a tab-separated table with ``# key: value`` header lines."""
    lines = [f"# {key}: {value}" for key, value in (header or {}).items()]
    lines.append("\t".join(columns))
    for row in rows:
        lines.append("\t".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def read_table(
    path: Path, expected_hash: Optional[str] = None
) -> tuple[dict, list[str], list[list[str]]]:
    """Read a table written by format_table.

    Returns:
        (header, column names, rows of raw cell strings)

    Raises:
        RecordMismatchError: If ``expected_hash`` differs from the table's config_hash
    """
    header: dict = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            header[key] = value
        elif not columns:
            columns = line.split("\t")
        elif line:
            rows.append(line.split("\t"))
    if expected_hash is not None and header.get("config_hash") != expected_hash:
        raise RecordMismatchError(str(path), expected_hash, header.get("config_hash"))
    return header, columns, rows


class TableFormatter(BaseFormatter):
    """Base of the TSV formatters; subclasses provide columns and rows."""

    table = ""

    def header(self, record: RunRecord) -> dict:
        return {
            "table": self.table,
            "experiment": record.experiment.value,
            "config_hash": record.config_hash,
        }

    def columns(self, record: RunRecord) -> list[str]:
        raise NotImplementedError

    def rows(self, record: RunRecord) -> list[list]:
        raise NotImplementedError

    def format(self, record: RunRecord) -> str:
        return format_table(self.columns(record), self.rows(record), self.header(record))


class TraceFormatter(TableFormatter):
    """Evaluation trace: index, restart, status, rho, Delta E/N, best so far, coefficients."""

    table = "trace"
    filename = "trace.tsv"

    def applies_to(self, record: RunRecord) -> bool:
        return bool(record.evaluation_trace)

    def columns(self, record: RunRecord) -> list[str]:
        dim = max((len(e.coefficients) for e in record.evaluation_trace), default=0)
        base = [
            "index",
            "restart",
            "status",
            "defect_density",
            "residual_energy_per_site",
            "best_so_far",
        ]
        return base + [f"x{i + 1}" for i in range(dim)]

    def rows(self, record: RunRecord) -> list[list]:
        best = record.best_so_far()
        return [
            [
                entry.index,
                entry.restart,
                entry.status.value,
                float(entry.defect_density),
                float(entry.residual_energy_per_site),
                float(best[i]),
                *entry.coefficients,
            ]
            for i, entry in enumerate(record.evaluation_trace)
        ]


class TimingsFormatter(TableFormatter):
    """Wall-clock time per evaluation (kept out of the deterministic trace)."""

    table = "timings"
    filename = "timings.tsv"

    def applies_to(self, record: RunRecord) -> bool:
        return bool(record.evaluation_trace)

    def columns(self, record: RunRecord) -> list[str]:
        return ["index", "wall_time", "error"]

    def rows(self, record: RunRecord) -> list[list]:
        return [[e.index, float(e.wall_time), e.error] for e in record.evaluation_trace]


class PulseFormatter(TableFormatter):
    """Best pulse with its guess: t, J/U, V/E_r, guess J/U, guess V/E_r."""

    table = "best_pulse"
    filename = "best_pulse.tsv"

    def applies_to(self, record: RunRecord) -> bool:
        return record.best_pulse is not None

    def columns(self, record: RunRecord) -> list[str]:
        return ["t", "ratio", "depth", "guess_ratio", "guess_depth"]

    def rows(self, record: RunRecord) -> list[list]:
        pulse = record.best_pulse
        if record.best_spec is not None:
            guess = render_guess(record.best_spec, pulse.times).values
        else:
            guess = np.full(len(pulse.times), math.nan)
        depths = display_depths(pulse.values)
        guess_depths = display_depths(guess)
        return [
            [float(t), float(c), float(v), float(g), float(gv)]
            for t, c, v, g, gv in zip(pulse.times, pulse.values, depths, guess, guess_depths)
        ]


class ProfileFormatter(TableFormatter):
    """Final-state profile: site, <n_i>, <Delta n_i^2>."""

    table = "profile"
    filename = "profile.tsv"

    def applies_to(self, record: RunRecord) -> bool:
        return record.final_profile is not None

    def columns(self, record: RunRecord) -> list[str]:
        return ["site", "occupation", "fluctuation"]

    def rows(self, record: RunRecord) -> list[list]:
        profile = record.final_profile
        return [
            [j + 1, n, f] for j, (n, f) in enumerate(zip(profile.occupations, profile.fluctuations))
        ]


class StudyTableFormatter(TableFormatter):
    """One of the study tables stored in ``record.tables``."""

    def __init__(self, table: str):
        self.table = table
        self.filename = f"{table}.tsv"

    def applies_to(self, record: RunRecord) -> bool:
        return bool(record.tables.get(self.table))

    def columns(self, record: RunRecord) -> list[str]:
        rows = record.tables.get(self.table, [])
        return list(rows[0].keys()) if rows else []

    def rows(self, record: RunRecord) -> list[list]:
        columns = self.columns(record)
        return [[row.get(c) for c in columns] for row in record.tables.get(self.table, [])]
