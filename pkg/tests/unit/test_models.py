"""Tests for models module."""

import math
from fractions import Fraction

import numpy as np
import pytest

from src.crab_mott.exceptions import DomainError, ShapeError
from src.crab_mott.models import (
    BackendKind,
    ControlTrajectory,
    EvaluationRecord,
    EvaluationStatus,
    ExperimentKind,
    FigureOfMerit,
    GuessKind,
    LatticeParams,
    MeritKind,
    PulseSpec,
    RunRecord,
    RunStatus,
    SiteProfile,
    as_fraction,
)


class TestEnums:
    """Tests for the lenient enum parsing."""

    @pytest.mark.parametrize(
        "text,expected",
        [
            ("exact", BackendKind.EXACT),
            ("MPS", BackendKind.MPS),
            ("robustness_sweep", ExperimentKind.ROBUSTNESS_SWEEP),
            ("custom-table", GuessKind.CUSTOM_TABLE),
            ("residual-energy-per-site", MeritKind.RESIDUAL_ENERGY),
            ("defect_density", MeritKind.DEFECT_DENSITY),
        ],
    )
    def test_from_string(self, text, expected):
        """Test values parse regardless of case and dash/underscore."""
        assert type(expected).from_string(text) is expected

    def test_unknown(self):
        """Test unknown values list the valid ones."""
        with pytest.raises(ValueError, match="Valid values"):
            BackendKind.from_string("dmrg")

    def test_exit_codes(self):
        """Test run statuses map onto the CLI exit codes."""
        assert RunStatus.SUCCESS.exit_code == 0
        assert RunStatus.HALTED.exit_code == 2
        assert RunStatus.BUDGET_EXHAUSTED.exit_code == 3


class TestLatticeParams:
    """Tests for LatticeParams."""

    def test_defaults(self):
        """Test unit filling on a homogeneous lattice."""
        params = LatticeParams(n_sites=6)
        assert params.n_atoms == 6
        assert params.local_dim == 5
        assert params.is_homogeneous

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_sites": 1},
            {"n_sites": 4, "n_max": 1},
            {"n_sites": 4, "trap_curvature": -0.1},
            {"n_sites": 4, "interaction": 0.0},
            {"n_sites": 3, "filling": Fraction(1, 2)},
            {"n_sites": 2, "n_max": 2, "filling": 3},
        ],
    )
    def test_invalid(self, kwargs):
        """Test parameters outside the model's domain are rejected."""
        with pytest.raises(DomainError):
            LatticeParams(**kwargs)

    def test_trapped(self):
        """Test the stand-in curvature 4U/N^2."""
        assert LatticeParams.trapped(10).trap_curvature == pytest.approx(0.04)

    def test_resized_keeps_filling(self):
        """Test resizing keeps filling and trap curvature."""
        params = LatticeParams(n_sites=8, trap_curvature=0.1, filling="1/2")
        resized = params.resized(10)
        assert resized.n_atoms == 5
        assert resized.trap_curvature == 0.1

    def test_as_fraction(self):
        """Test fillings given as float, str and int."""
        assert as_fraction(0.5) == Fraction(1, 2)
        assert as_fraction("3/2") == Fraction(3, 2)
        assert as_fraction(1) == Fraction(1)


class TestPulseSpec:
    """Tests for PulseSpec validation and serialization."""

    def test_length_mismatch(self):
        """Test coefficient vectors must have M entries."""
        with pytest.raises(ShapeError):
            PulseSpec(GuessKind.LINEAR, 1.0, 2, (0.0,), (0.0, 0.0), (0.1, 0.2))

    def test_jitter_range(self):
        """Test jitter outside [0, 1] is rejected."""
        with pytest.raises(DomainError):
            PulseSpec(GuessKind.LINEAR, 1.0, 1, (0.0,), (0.0,), (1.5,))

    def test_nonpositive_duration(self):
        """Test T must be positive."""
        with pytest.raises(DomainError):
            PulseSpec(GuessKind.LINEAR, 0.0, 0)

    def test_custom_table_validation(self):
        """Test a table must span [0, T] and match the boundaries."""
        with pytest.raises(DomainError):
            PulseSpec(GuessKind.CUSTOM_TABLE, 2.0, 0, boundary_values=(0.5, 0.1),
                      guess_table=((0.0, 0.5), (1.0, 0.1)))
        with pytest.raises(DomainError):
            PulseSpec(GuessKind.CUSTOM_TABLE, 1.0, 0, boundary_values=(0.4, 0.1),
                      guess_table=((0.0, 0.5), (1.0, 0.1)))

    def test_dict_round_trip(self):
        """Test to_dict / from_dict preserve every field."""
        spec = PulseSpec(
            GuessKind.EXPONENTIAL, 3.0, 2, (0.1, -0.2), (0.3, 0.0), (0.25, 0.75), rng_seed=4
        )
        assert PulseSpec.from_dict(spec.to_dict()) == spec

    def test_string_kind(self):
        """Test the guess kind may be given as a string."""
        assert PulseSpec("linear", 1.0, 0).guess_kind is GuessKind.LINEAR


class TestControlTrajectory:
    """Tests for ControlTrajectory."""

    def test_properties(self):
        """Test dt, duration and boundary values."""
        trajectory = ControlTrajectory(np.linspace(0, 2, 5), np.linspace(0.5, 0.1, 5))
        assert trajectory.n_steps == 4
        assert trajectory.dt == pytest.approx(0.5)
        assert trajectory.t_total == 2.0
        assert (trajectory.start, trajectory.end) == (0.5, 0.1)

    def test_step_ratios_fall_back_to_average(self):
        """Test endpoint averages are used without midpoint samples."""
        trajectory = ControlTrajectory(np.array([0.0, 1.0, 2.0]), np.array([0.4, 0.2, 0.0]))
        assert np.allclose(trajectory.step_ratios(), [0.3, 0.1])

    def test_nonuniform_grid(self):
        """Test the grid must be uniform."""
        with pytest.raises(DomainError):
            ControlTrajectory(np.array([0.0, 1.0, 3.0]), np.ones(3))

    def test_shape_mismatch(self):
        """Test values and midpoints must match the grid."""
        with pytest.raises(ShapeError):
            ControlTrajectory(np.array([0.0, 1.0]), np.ones(3))
        with pytest.raises(ShapeError):
            ControlTrajectory(np.array([0.0, 1.0]), np.ones(2), np.ones(2))

    def test_reversed(self):
        """Test the reversed pulse plays the samples backwards."""
        trajectory = ControlTrajectory(
            np.array([0.0, 1.0, 2.0]), np.array([3.0, 2.0, 1.0]), np.array([2.5, 1.5])
        )
        back = trajectory.reversed()
        assert list(back.values) == [1.0, 2.0, 3.0]
        assert list(back.midpoint_values) == [1.5, 2.5]


@pytest.fixture
def profile():
    """Two-site Mott profile."""
    return SiteProfile(occupations=(1.0, 1.0), fluctuations=(0.0, 0.0), n_sites=2)


class TestFigureOfMerit:
    """Tests for FigureOfMerit."""

    def test_value_follows_kind(self, profile):
        """Test value reports the selected quantity."""
        a = FigureOfMerit(MeritKind.DEFECT_DENSITY, 0.1, 0.2, profile)
        b = FigureOfMerit(MeritKind.RESIDUAL_ENERGY, 0.1, 0.2, profile)
        assert (a.value, b.value) == (0.1, 0.2)
        assert a.auxiliary is profile

    def test_negative_values(self, profile):
        """Test negative figures of merit are rejected."""
        with pytest.raises(DomainError):
            FigureOfMerit(MeritKind.DEFECT_DENSITY, -0.1, 0.0, profile)
        with pytest.raises(DomainError):
            FigureOfMerit(MeritKind.RESIDUAL_ENERGY, 0.0, -1e-6, profile)


def entry(index, status, rho, energy):
    """Trace entry with the given figures of merit."""
    return EvaluationRecord(index=index, coefficients=(0.1 * index,), status=status,
                            defect_density=rho, residual_energy_per_site=energy)


class TestRunRecord:
    """Tests for RunRecord."""

    @pytest.fixture
    def trace(self):
        return [
            entry(0, EvaluationStatus.SUCCESS, 0.30, 0.05),
            entry(1, EvaluationStatus.FAILED, math.nan, math.nan),
            entry(2, EvaluationStatus.SUCCESS, 0.10, 0.08),
            entry(3, EvaluationStatus.SUCCESS, 0.20, 0.01),
        ]

    def test_best_so_far_energy(self, trace):
        """Test the running minimum of the residual energy, failures counting as +inf."""
        record = RunRecord(ExperimentKind.OPTIMIZE, {}, "h", 0, "1.0.0", evaluation_trace=trace)
        assert record.best_so_far() == [0.05, 0.05, 0.05, 0.01]

    def test_best_so_far_defect_density(self, trace):
        """Test the running minimum follows the configured merit."""
        snapshot = {"optimizer": {"merit": "defect_density"}}
        record = RunRecord(
            ExperimentKind.OPTIMIZE, snapshot, "h", 0, "1.0.0", evaluation_trace=trace
        )
        assert record.best_so_far() == [0.30, 0.30, 0.10, 0.10]

    def test_dict_round_trip(self, trace, profile):
        """Test a record survives to_dict / from_dict."""
        record = RunRecord(
            ExperimentKind.OPTIMIZE, {"optimizer": {"seed": 1}}, "abc", 1, "1.0.0",
            status=RunStatus.HALTED, evaluation_trace=trace,
            best_spec=PulseSpec(GuessKind.LINEAR, 1.0, 0), final_profile=profile,
            tables={"robustness": [{"delta_sites": 0}]},
        )
        again = RunRecord.from_dict(record.to_dict())
        assert again.status is RunStatus.HALTED
        assert again.best_spec == record.best_spec
        assert again.final_profile == profile
        assert [e.index for e in again.evaluation_trace] == [0, 1, 2, 3]
        assert again.tables == record.tables
        assert again.created == record.created
