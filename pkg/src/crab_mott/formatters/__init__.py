"""Output formatters for run records.

This package writes a run directory: the JSON record document, the YAML
config snapshot, tab-separated tables and gnuplot script stubs.
"""

import logging
from pathlib import Path

from ..models import RunRecord
from .base import BaseFormatter
from .gnuplot_formatter import GnuplotFormatter, gnuplot_formatters
from .record_formatter import ConfigFormatter, RecordFormatter, load_record
from .table_formatter import (
    ProfileFormatter,
    PulseFormatter,
    StudyTableFormatter,
    TableFormatter,
    TimingsFormatter,
    TraceFormatter,
    format_table,
    read_table,
)

logger = logging.getLogger(__name__)

STUDY_TABLES = ("robustness", "baselines", "convergence", "distortion")


def get_formatter(format_name: str) -> BaseFormatter:
    """
    Get a formatter instance by name.

    Args:
        format_name: record, config, trace, timings, pulse, profile or a study table name

    Returns:
        Formatter instance

    Raises:
        ValueError: If format name is not recognized
    """
    formatters = {
        "record": RecordFormatter,
        "config": ConfigFormatter,
        "trace": TraceFormatter,
        "timings": TimingsFormatter,
        "pulse": PulseFormatter,
        "profile": ProfileFormatter,
    }

    format_lower = format_name.lower()
    if format_lower in STUDY_TABLES:
        return StudyTableFormatter(format_lower)
    if format_lower not in formatters:
        valid_formats = ", ".join([*formatters, *STUDY_TABLES])
        raise ValueError(f"Unknown format: {format_name}. Valid formats: {valid_formats}")

    return formatters[format_lower]()


def write_run(record: RunRecord, directory: Path) -> list[Path]:
    """Write every applicable output file of a record into ``directory``.

    Returns:
        Paths written, in a fixed order
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = ["record", "config", "trace", "timings", "pulse", "profile", *STUDY_TABLES]
    formatters = [get_formatter(name) for name in names] + gnuplot_formatters()

    written = []
    for formatter in formatters:
        if not formatter.applies_to(record):
            continue
        path = directory / formatter.filename
        formatter.write_to_file(record, path)
        written.append(path)
    logger.info("Wrote %d files to %s", len(written), directory)
    return written


__all__ = [
    "BaseFormatter",
    "ConfigFormatter",
    "GnuplotFormatter",
    "ProfileFormatter",
    "PulseFormatter",
    "RecordFormatter",
    "STUDY_TABLES",
    "StudyTableFormatter",
    "TableFormatter",
    "TimingsFormatter",
    "TraceFormatter",
    "format_table",
    "get_formatter",
    "load_record",
    "read_table",
    "write_run",
]
