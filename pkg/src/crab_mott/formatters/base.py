"""Base formatter interface for run output files."""

from abc import ABC, abstractmethod
from pathlib import Path

from ..models import RunRecord


class BaseFormatter(ABC):
    """Abstract base class for all output formatters.

    All formatters must implement the format() method which takes
    a RunRecord and returns the file contents.
    """

    #: Default file name inside a run directory
    filename: str = ""

    @abstractmethod
    def format(self, record: RunRecord) -> str:
        """Format a run record into output text.

        Args:
            record: Run record to format

        Returns:
            Formatted output as string
        """
        pass

    def applies_to(self, record: RunRecord) -> bool:
        """Whether the record carries the data this formatter writes."""
        return True

    def write_to_file(self, record: RunRecord, filepath: Path) -> None:
        """Write formatted output to a file.

        Args:
            record: Run record to format
            filepath: Path to output file
        """
        output = self.format(record)
        filepath.write_text(output, encoding="utf-8")
