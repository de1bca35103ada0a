"""Tests for ui module."""

import math
from unittest.mock import patch

import pytest
from rich.progress import Progress
from rich.table import Table

from src.crab_mott.models import (
    EvaluationRecord,
    EvaluationStatus,
    ExperimentKind,
    RunRecord,
    RunStatus,
)
from src.crab_mott.ui import (
    create_progress_bar,
    create_study_table,
    create_summary_table,
    print_error,
    print_success,
    print_warning,
)


@pytest.fixture
def record():
    """Halted optimization record with one failed evaluation."""
    trace = [
        EvaluationRecord(index=0, coefficients=(0.0,), status=EvaluationStatus.SUCCESS,
                         defect_density=0.2, residual_energy_per_site=0.01, wall_time=80.0),
        EvaluationRecord(index=1, coefficients=(0.1,), status=EvaluationStatus.TIMEOUT,
                         wall_time=45.0),
    ]
    return RunRecord(
        ExperimentKind.OPTIMIZE, {}, "0123456789abcdef", 7, "1.0.0",
        status=RunStatus.HALTED, evaluation_trace=trace,
        best_defect_density=0.2, best_residual_energy=0.01,
        truncation_summary={"evolutions": 2, "max_discarded_weight": 1e-9},
        ground_reference="exact",
    )


class TestCreateProgressBar:
    """Tests for create_progress_bar function."""

    def test_creates_progress_bar(self):
        """Test creating a progress bar."""
        progress = create_progress_bar("Optimizing")
        assert isinstance(progress, Progress)


class TestCreateSummaryTable:
    """Tests for create_summary_table function."""

    def test_rows(self, record):
        """Test the summary lists status, counts and figures of merit."""
        table = create_summary_table(record)
        assert isinstance(table, Table)
        assert "0123456789abcdef" in table.title
        fields = list(table.columns[0].cells)
        assert fields[:5] == [
            "Status", "Evaluations", "Evaluation time", "Defect density", "Residual energy / site"
        ]
        assert "E_G from" in fields
        assert "Max discarded weight" in fields
        assert "2 (1 failed)" in list(table.columns[1].cells)

    def test_evaluation_time(self, record):
        """Test the summed wall time is shown as a duration."""
        table = create_summary_table(record)
        fields = list(table.columns[0].cells)
        values = list(table.columns[1].cells)
        assert values[fields.index("Evaluation time")] == "2m 5.0s"

    def test_missing_values(self):
        """Test NaN figures of merit are shown as n/a."""
        record = RunRecord(ExperimentKind.BASELINE_GUESSES, {}, "h", 0, "1.0.0")
        values = list(create_summary_table(record).columns[1].cells)
        assert values.count("n/a") == 2
        assert math.isnan(record.best_defect_density)


class TestCreateStudyTable:
    """Tests for create_study_table function."""

    def test_empty(self):
        """Test an empty study gives no table."""
        assert create_study_table("robustness", []) is None

    def test_error_column_hidden(self):
        """Test the error column is left out and floats are formatted."""
        rows = [{"delta_sites": 0, "defect_density": 0.0123, "status": "success", "error": ""}]
        table = create_study_table("robustness", rows)
        assert [c.header for c in table.columns] == ["delta_sites", "defect_density", "status"]
        assert list(table.columns[1].cells) == ["1.2300e-02"]


class TestMessages:
    """Tests for the console helpers."""

    @pytest.mark.parametrize(
        "func,prefix",
        [(print_error, "ERROR:"), (print_success, "SUCCESS:"), (print_warning, "WARNING:")],
    )
    def test_prints(self, func, prefix):
        """Test the message is printed with its prefix."""
        with patch("src.crab_mott.ui.console") as console:
            func("message")
        printed = console.print.call_args.args[0]
        assert prefix in printed
        assert "message" in printed
