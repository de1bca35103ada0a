"""JSON run document and YAML config snapshot."""

import json
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from ..exceptions import RecordMismatchError
from ..models import RunRecord
from ..pulse import render_pulse, time_grid
from .base import BaseFormatter


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays to plain Python for the serializers."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


class RecordFormatter(BaseFormatter):
    """Format a run record as one self-describing JSON document.

    Non-finite floats are written as JSON ``NaN`` / ``Infinity``, which
    ``json.loads`` reads back.
    """

    filename = "record.json"

    def __init__(self, indent: int = 2):
        """Initialize record formatter.

        Args:
            indent: Number of spaces for indentation (default: 2)
        """
        self.indent = indent

    def format(self, record: RunRecord) -> str:
        return json.dumps(_plain(record.to_dict()), indent=self.indent, sort_keys=True) + "\n"


class ConfigFormatter(BaseFormatter):
    """Write the config snapshot as YAML, loadable with ``crab-mott -c``."""

    filename = "config.yaml"

    def format(self, record: RunRecord) -> str:
        header = f"# config_hash: {record.config_hash}\n"
        body = yaml.safe_dump(
            _plain(record.config_snapshot), default_flow_style=None, sort_keys=True
        )
        return header + body


def load_record(path: Path, expected_hash: Optional[str] = None) -> RunRecord:
    """Load a record.json (or the run directory containing one).

    The best pulse is re-rendered from the stored PulseSpec on the grid of
    the recorded time step.

    Args:
        path: record.json or run directory
        expected_hash: If given, the record's config_hash must match

    Raises:
        FileNotFoundError: If no record exists at ``path``
        RecordMismatchError: If the hashes differ
    """
    path = Path(path)
    if path.is_dir():
        path = path / RecordFormatter.filename
    if not path.exists():
        raise FileNotFoundError(f"Run record not found: {path}")
    record = RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8")))
    if expected_hash is not None and record.config_hash != expected_hash:
        raise RecordMismatchError(str(path), expected_hash, record.config_hash)

    dt = record.config_snapshot.get("backend", {}).get("dt")
    if record.best_spec is not None and dt and math.isfinite(dt):
        record.best_pulse = render_pulse(record.best_spec, time_grid(record.best_spec.t_total, dt))
    return record
