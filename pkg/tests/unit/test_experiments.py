"""Tests for experiments module."""

import math

import pytest

from src.crab_mott.config import RunConfig
from src.crab_mott.exceptions import ConfigurationError
from src.crab_mott.experiments import (
    EXPERIMENTS,
    baseline_guesses,
    convergence_study,
    distortion_study,
    fixed_pulse,
    robustness_sweep,
    run,
)
from src.crab_mott.models import EvaluationStatus, ExperimentKind, RunStatus


def make_config(tmp_path, experiment="optimize", **sections):
    """Three-site, n_max = 2 configuration that runs in well under a second."""
    data = {
        "experiment": experiment,
        "model": {"n_sites": 3, "n_max": 2},
        "control": {"t_total": 2.0, "n_modes": 1},
        "backend": {"dt": 0.05},
        "optimizer": {"budget": 6, "restarts": 0, "rho_halt": math.inf, "seed": 1},
        "study": {"transfer_sites": 2, "transfer_budget": 3, "delta_sites": [-1, 0, 1],
                  "amplitude_errors": [-0.02, 0.0], "noise_levels": [0.05],
                  "bond_dims": [4], "time_steps": [0.05], "cutoffs": [2]},
        "output_dir": str(tmp_path / experiment),
    }
    for name, values in sections.items():
        data.setdefault(name, {}).update(values)
    return RunConfig.from_dict(data)


class TestOptimize:
    """Tests for the optimize experiment."""

    def test_budget_exhausted(self, tmp_path):
        """Test a search without halting spends the whole budget and persists the run."""
        config = make_config(tmp_path)
        record = run(config)
        assert record.status is RunStatus.BUDGET_EXHAUSTED
        assert len(record.evaluation_trace) == 6
        assert record.best_pulse is not None
        energies = [e.residual_energy_per_site for e in record.evaluation_trace]
        assert record.best_residual_energy == min(energies)
        assert record.ground_reference == "exact"
        out = config.output_path
        for name in ("record.json", "config.yaml", "trace.tsv", "timings.tsv",
                     "best_pulse.tsv", "profile.tsv"):
            assert (out / name).exists()

    def test_halts(self, tmp_path):
        """Test a generous threshold halts at the first evaluation."""
        record = run(make_config(tmp_path, optimizer={"rho_halt": 10.0}), persist=False)
        assert record.status is RunStatus.HALTED
        assert len(record.evaluation_trace) == 1
        assert record.best_defect_density == record.evaluation_trace[0].defect_density

    def test_halted_record_reports_threshold_pulse(self, tmp_path):
        """Test a halted run's best pulse is the one that reached the threshold."""
        full = run(make_config(tmp_path), persist=False)
        densities = [e.defect_density for e in full.evaluation_trace]
        threshold = min(densities[1:])
        record = run(make_config(tmp_path, optimizer={"rho_halt": threshold}), persist=False)
        halting = record.evaluation_trace[-1]
        assert record.status is RunStatus.HALTED
        assert halting.defect_density <= threshold
        assert record.best_defect_density == halting.defect_density
        assert tuple(record.best_spec.coefficient_vector()) == halting.coefficients

    def test_trace_reproducible(self, tmp_path):
        """Test the same configuration writes the same trace table."""
        config = make_config(tmp_path)
        run(config)
        first = (config.output_path / "trace.tsv").read_text()
        run(config)
        assert (config.output_path / "trace.tsv").read_text() == first

    def test_progress(self, tmp_path):
        """Test progress reports (completed, budget)."""
        calls = []

        def on_progress(done, total):
            calls.append((done, total))

        run(make_config(tmp_path), on_progress=on_progress, persist=False)
        assert calls[-1] == (6, 6)


class TestFixedPulse:
    """Tests for the pulse used by the fixed-pulse experiments."""

    def test_guess_by_default(self, tmp_path):
        """Test the uncorrected guess is used without a pulse record."""
        config = make_config(tmp_path)
        assert fixed_pulse(config) == config.pulse_spec()

    def test_from_record(self, tmp_path):
        """Test a recorded best pulse is loaded from a run directory."""
        optimized = run(make_config(tmp_path))
        study = {"pulse_record": str(tmp_path / "optimize")}
        config = make_config(tmp_path, "evaluate-pulse", study=study)
        assert fixed_pulse(config) == optimized.best_spec

    def test_record_without_pulse(self, tmp_path):
        """Test a record holding no pulse is a configuration error."""
        run(make_config(tmp_path, "baseline-guesses"))
        study = {"pulse_record": str(tmp_path / "baseline-guesses")}
        config = make_config(tmp_path, "evaluate-pulse", study=study)
        with pytest.raises(ConfigurationError):
            fixed_pulse(config)


class TestEvaluatePulse:
    """Tests for the evaluate-pulse experiment."""

    def test_single_entry(self, tmp_path):
        """Test one successful evaluation is recorded."""
        record = run(make_config(tmp_path, "evaluate-pulse"), persist=False)
        assert record.status is RunStatus.SUCCESS
        assert [e.status for e in record.evaluation_trace] == [EvaluationStatus.SUCCESS]
        assert record.best_defect_density == record.evaluation_trace[0].defect_density
        assert record.final_profile.n_sites == 3


class TestRobustnessSweep:
    """Tests for the robustness sweep."""

    def test_rows(self, tmp_path):
        """Test one row per size change with the flag for large changes."""
        config = make_config(tmp_path, "robustness-sweep")
        rows = robustness_sweep(config.pulse_spec(), config)
        assert [r["delta_sites"] for r in rows] == [-1, 0, 1]
        assert [r["n_sites"] for r in rows] == [2, 3, 4]
        assert [r["n_atoms"] for r in rows] == [2, 3, 4]
        assert [r["extrapolation"] for r in rows] == [True, False, True]
        assert all(r["status"] == "success" for r in rows)
        assert list(rows[0]) == ["delta_sites", "n_sites", "n_atoms", "defect_density",
                                 "residual_energy_per_site", "extrapolation", "status", "error"]

    def test_capacity_row(self, tmp_path):
        """Test a lattice too large for the exact engine becomes a capacity row."""
        config = make_config(tmp_path, "robustness-sweep", backend={"max_states": 10})
        rows = robustness_sweep(config.pulse_spec(), config)
        assert [r["status"] for r in rows] == ["success", "success", "capacity"]
        assert math.isnan(rows[2]["defect_density"])
        assert "max_states" in rows[2]["error"]

    def test_too_small(self, tmp_path):
        """Test sizes below two sites are refused up front."""
        config = make_config(tmp_path, "robustness-sweep")
        with pytest.raises(ConfigurationError, match="offending"):
            robustness_sweep(config.pulse_spec(), config, delta_range=[-2, 0])

    def test_record(self, tmp_path):
        """Test the record carries the table and the dN = 0 figures of merit."""
        record = run(make_config(tmp_path, "robustness-sweep"))
        row = record.tables["robustness"][1]
        assert record.best_defect_density == row["defect_density"]
        assert (tmp_path / "robustness-sweep" / "robustness.tsv").exists()


    def test_nominal_row_reproduces_optimization(self, tmp_path):
        """Test the dN = 0 row re-evaluates the optimized pulse to the same rho."""
        optimized = run(make_config(tmp_path))
        study = {"pulse_record": str(tmp_path / "optimize")}
        record = run(make_config(tmp_path, "robustness-sweep", study=study), persist=False)
        nominal = record.tables["robustness"][1]
        assert nominal["delta_sites"] == 0
        assert nominal["defect_density"] == optimized.best_defect_density
        assert nominal["residual_energy_per_site"] == optimized.best_residual_energy


class TestBaselineGuesses:
    """Tests for the baseline comparison."""

    def test_rows(self, tmp_path):
        """Test the four guesses are evaluated in order."""
        rows = baseline_guesses(make_config(tmp_path, "baseline-guesses"))
        assert [r["guess"] for r in rows] == ["exponential", "linear", "random", "transferred"]
        assert all(r["status"] == "success" for r in rows)

    def test_transferred_from_record(self, tmp_path):
        """Test a given pulse record replaces the transfer optimization."""
        optimized = run(make_config(tmp_path))
        study = {"pulse_record": str(tmp_path / "optimize")}
        config = make_config(tmp_path, "baseline-guesses", study=study)
        rows = baseline_guesses(config)
        assert rows[3]["defect_density"] == pytest.approx(optimized.best_defect_density)


class TestConvergenceStudy:
    """Tests for the convergence study."""

    def test_requires_mps(self, tmp_path):
        """Test the study refuses the exact backend."""
        config = make_config(tmp_path, "convergence-study")
        with pytest.raises(ConfigurationError, match="mps"):
            convergence_study(config.pulse_spec(), config)

    def test_grid(self, tmp_path):
        """Test one row per grid cell with its truncation weight."""
        config = make_config(tmp_path, "convergence-study", backend={"kind": "mps"},
                             study={"bond_dims": [2, 4], "cutoffs": [2]})
        rows = convergence_study(config.pulse_spec(), config)
        assert [(r["m_max"], r["dt"], r["n_max"]) for r in rows] == [(2, 0.05, 2), (4, 0.05, 2)]
        assert all(r["max_discarded_weight"] >= 0 for r in rows if r["status"] == "success")


class TestDistortionStudy:
    """Tests for the distortion study."""

    def test_rows(self, tmp_path):
        """Test amplitude rows precede noise rows and the nominal pulse matches an evaluation."""
        config = make_config(tmp_path, "distortion-study")
        rows = distortion_study(config.pulse_spec(), config)
        assert [(r["distortion"], r["epsilon"]) for r in rows] == [
            ("amplitude", -0.02), ("amplitude", 0.0), ("noise", 0.05)
        ]
        nominal = run(make_config(tmp_path, "evaluate-pulse"), persist=False)
        assert rows[1]["defect_density"] == pytest.approx(nominal.best_defect_density)


class TestDispatch:
    """Tests for the experiment table."""

    def test_every_experiment_registered(self):
        """Test each experiment kind has a runner."""
        assert set(EXPERIMENTS) == set(ExperimentKind)
