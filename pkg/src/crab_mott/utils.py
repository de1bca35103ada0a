"""Utility functions for paths, hashing and number formatting.

This module provides pure utility functions used throughout the application.
All functions are stateless and have no side effects beyond their documented behavior.
"""

import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any


def expand_path(path: str) -> Path:
    """Expand user home directory and environment variables in path.

    Args:
        path: Path string that may contain ~ or environment variables

    Returns:
        Expanded Path object

    Examples:
        >>> expand_path("~/runs/n8")
        Path("/home/user/runs/n8")
        >>> expand_path("$HOME/runs")
        Path("/home/user/runs")
    """
    expanded = os.path.expanduser(os.path.expandvars(path))
    return Path(expanded).resolve()


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "item"):
        return value.item()
    return value


def canonical_json(data: Any) -> str:
    """Serialize to JSON with sorted keys and no insignificant whitespace.

    Non-finite floats are written as the strings "inf", "-inf" and "nan".
    """
    return json.dumps(_jsonable(data), sort_keys=True, separators=(",", ":"))


def config_hash(data: Any) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form.

    Examples:
        >>> len(config_hash({"a": 1}))
        16
    """
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()[:16]


def format_float(value: float) -> str:
    """Shortest string that round-trips to the same float.

    Examples:
        >>> format_float(0.1)
        '0.1'
        >>> format_float(float("nan"))
        'nan'
    """
    return repr(float(value))


def format_duration(seconds: float) -> str:
    """Format duration in seconds to human-readable string.

    Args:
        seconds: Duration in seconds

    Returns:
        Formatted duration string

    Examples:
        >>> format_duration(45)
        '45.0s'
        >>> format_duration(125)
        '2m 5.0s'
        >>> format_duration(3665)
        '1h 1m 5.0s'
    """
    if seconds < 60:
        return f"{seconds:.1f}s"

    minutes = int(seconds // 60)
    remaining_seconds = seconds % 60

    if minutes < 60:
        return f"{minutes}m {remaining_seconds:.1f}s"

    hours = minutes // 60
    remaining_minutes = minutes % 60
    return f"{hours}h {remaining_minutes}m {remaining_seconds:.1f}s"
