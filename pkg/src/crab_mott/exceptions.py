"""Exception hierarchy for crab-mott.

Errors that describe bad input subclass ValueError so callers (and the CLI)
can keep handling them the usual way.
"""

from typing import Optional, Sequence


class CrabError(Exception):
    """Base class for all crab-mott errors."""


class DomainError(CrabError, ValueError):
    """A parameter lies outside the domain where the model is defined."""


class ShapeError(CrabError, ValueError):
    """Coefficient vectors have inconsistent shapes."""


class ConfigurationError(CrabError, ValueError):
    """A run configuration (or an optimizer setting) is invalid."""


class CapacityError(CrabError):
    """The requested Hilbert-space basis exceeds the configured memory budget."""

    def __init__(self, required: int, limit: int):
        self.required = required
        self.limit = limit
        super().__init__(
            f"Fock basis needs {required} states, above the max_states limit of {limit}"
        )


class ConvergenceError(CrabError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(
        self,
        message: str,
        residual: Optional[float] = None,
        energies: Optional[Sequence[float]] = None,
    ):
        self.residual = residual
        self.energies = tuple(energies) if energies is not None else None
        details = []
        if residual is not None:
            details.append(f"residual={residual:.3e}")
        if energies is not None:
            details.append("last energies=" + ", ".join(f"{e:.12f}" for e in energies))
        super().__init__(f"{message} ({'; '.join(details)})" if details else message)


class TruncationOverflowError(CrabError):
    """Cumulative discarded weight of an MPS evolution exceeded the abort threshold."""

    def __init__(self, discarded_weight: float, threshold: float):
        self.discarded_weight = discarded_weight
        self.threshold = threshold
        super().__init__(
            f"Cumulative discarded weight {discarded_weight:.3e} exceeds {threshold:.3e}; "
            "bond dimension m is too small for this pulse"
        )


class EvaluationTimeoutError(CrabError):
    """A single pulse evaluation ran past its wall-clock budget."""


class RecordMismatchError(CrabError):
    """A persisted file was produced by a different configuration."""

    def __init__(self, path: str, expected: str, found: Optional[str]):
        self.path = path
        self.expected = expected
        self.found = found
        super().__init__(f"{path}: config hash {found!r} does not match expected {expected!r}")
