"""Experiment harness: runs a configured experiment and persists its record.

Experiments:
- optimize: CRAB search from the configured guess
- evaluate-pulse: one evaluation of a fixed pulse
- robustness-sweep: a fixed pulse applied to resized lattices at constant filling
- baseline-guesses: unoptimized guesses and a pulse transferred from a smaller lattice
- convergence-study: a fixed pulse over MPS bond dimension, time step and n_max
- distortion-study: a fixed pulse under amplitude miscalibration and smooth noise
"""

import logging
import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .backends import Backend, BackendSettings, get_backend
from .config import RunConfig
from .crab import evaluate, evaluate_trajectory, optimize
from .exceptions import ConfigurationError
from .executor import evaluate_point, map_ordered
from .formatters import load_record, write_run
from .models import (
    BackendKind,
    ControlTrajectory,
    DefectMeasure,
    EvaluationRecord,
    EvaluationStatus,
    ExperimentKind,
    GuessKind,
    LatticeParams,
    MeritKind,
    PulseSpec,
    ReferenceProfile,
    RunRecord,
)
from .pulse import (
    initial_spec,
    noisy_trajectory,
    random_correction,
    render_pulse,
    scale_trajectory,
    time_grid,
)

logger = logging.getLogger(__name__)

# on_progress(completed, total)
ProgressHook = Callable[[int, int], None]

# Size changes beyond this fraction of N0 are flagged as extrapolation.
EXTRAPOLATION_FRACTION = 0.2


def _version() -> str:
    from . import __version__

    return __version__


def _merit(config: RunConfig) -> MeritKind:
    return MeritKind.from_string(config.optimizer.merit)


def _reference(config: RunConfig) -> ReferenceProfile:
    return ReferenceProfile.from_string(config.optimizer.reference_profile)


def _measure(config: RunConfig) -> DefectMeasure:
    return DefectMeasure.from_string(config.optimizer.defect_measure)


def _backend(config: RunConfig, params: LatticeParams) -> Backend:
    settings: BackendSettings = config.backend.to_settings()
    return get_backend(settings.kind, params, settings, dt=config.backend.dt)


def _base_record(config: RunConfig, experiment: ExperimentKind) -> RunRecord:
    return RunRecord(
        experiment=experiment,
        config_snapshot=config.to_dict(),
        config_hash=config.hash(),
        seed=config.optimizer.seed,
        version=_version(),
    )


def _deadline(config: RunConfig) -> Optional[float]:
    timeout = config.backend.eval_timeout
    return time.monotonic() + timeout if timeout else None


def fixed_pulse(config: RunConfig) -> PulseSpec:
    """Pulse studied by the fixed-pulse experiments.

    Taken from ``study.pulse_record`` (a record.json or run directory) when set,
    otherwise the configured uncorrected guess.
    """
    if config.study.pulse_record:
        record = load_record(Path(config.study.pulse_record))
        if record.best_spec is None:
            raise ConfigurationError(f"{config.study.pulse_record} holds no pulse")
        logger.info(
            "Using the best pulse of %s (config %s)", config.study.pulse_record, record.config_hash
        )
        return record.best_spec
    return config.pulse_spec()


def _row_status(entry: EvaluationRecord) -> dict:
    return {
        "defect_density": float(entry.defect_density),
        "residual_energy_per_site": float(entry.residual_energy_per_site),
        "status": entry.status.value,
        "error": entry.error,
    }


def _evaluate_row(
    trajectory: ControlTrajectory,
    make_backend: Callable[[], Backend],
    config: RunConfig,
) -> EvaluationRecord:
    """Evaluate a trajectory on a backend built inside the guard, so capacity errors become rows."""

    def run_one(_: np.ndarray, deadline: Optional[float]):
        backend = make_backend()
        return evaluate_trajectory(
            trajectory, backend, _merit(config), _reference(config), deadline, _measure(config)
        )

    return evaluate_point(run_one, np.empty(0), config.backend.eval_timeout)


def _progress(on_progress: Optional[ProgressHook], total: int):
    if on_progress is None:
        return None
    counter = {"done": 0}

    def hook(*_):
        counter["done"] += 1
        on_progress(counter["done"], total)

    return hook


def optimize_experiment(
    config: RunConfig, on_progress: Optional[ProgressHook] = None
) -> RunRecord:
    """CRAB optimization from the configured guess."""
    params = config.lattice_params()
    backend = _backend(config, params)
    initial = config.pulse_spec()
    opt = config.optimizer
    logger.info(
        "Optimizing N=%d, %d atoms, T=%g, M=%d on the %s backend (budget %d)",
        params.n_sites, params.n_atoms, initial.t_total, initial.n_modes, backend.name, opt.budget,
    )

    def callback(stats, _entry) -> None:
        if on_progress is not None:
            on_progress(stats.completed, opt.budget)

    best_spec, outcome = optimize(
        initial,
        backend,
        params,
        budget=opt.budget,
        rho_halt=opt.rho_halt,
        dt=config.backend.dt,
        restarts=opt.restarts,
        scale=opt.scale,
        optimize_frequencies=opt.optimize_frequencies,
        kind=_merit(config),
        reference=_reference(config),
        measure=_measure(config),
        max_workers=opt.workers,
        timeout=config.backend.eval_timeout,
        progress_callback=callback,
    )

    record = _base_record(config, ExperimentKind.OPTIMIZE)
    record.status = outcome.status
    record.evaluation_trace = outcome.trace
    record.best_spec = best_spec
    record.best_pulse = render_pulse(best_spec, time_grid(best_spec.t_total, config.backend.dt))
    best = outcome.best_record
    if best is not None and best.merit is not None:
        record.final_profile = best.merit.profile
        record.best_defect_density = best.defect_density
        record.best_residual_energy = best.residual_energy_per_site
    record.truncation_summary = backend.truncation_summary()
    record.ground_reference = backend.reference_ground_energy(record.best_pulse.end)[1]
    return record


def evaluate_pulse_experiment(
    config: RunConfig, on_progress: Optional[ProgressHook] = None
) -> RunRecord:
    """Single evaluation of a fixed pulse; errors propagate."""
    params = config.lattice_params()
    backend = _backend(config, params)
    spec = fixed_pulse(config)
    merit = evaluate(
        spec,
        backend,
        params,
        config.backend.dt,
        _merit(config),
        _reference(config),
        _deadline(config),
        _measure(config),
    )

    record = _base_record(config, ExperimentKind.EVALUATE_PULSE)
    record.evaluation_trace = [
        EvaluationRecord(
            index=0,
            coefficients=tuple(spec.coefficient_vector()),
            status=EvaluationStatus.SUCCESS,
            defect_density=merit.defect_density,
            residual_energy_per_site=merit.residual_energy_per_site,
            merit=merit,
        )
    ]
    record.best_spec = spec
    record.best_pulse = render_pulse(spec, time_grid(spec.t_total, config.backend.dt))
    record.final_profile = merit.profile
    record.best_defect_density = merit.defect_density
    record.best_residual_energy = merit.residual_energy_per_site
    record.truncation_summary = backend.truncation_summary()
    record.ground_reference = backend.reference_ground_energy(record.best_pulse.end)[1]
    if on_progress:
        on_progress(1, 1)
    logger.info(
        "Pulse evaluated: rho=%.4e, dE/N=%.4e", merit.defect_density, merit.residual_energy_per_site
    )
    return record


def robustness_sweep(
    spec: PulseSpec,
    config: RunConfig,
    delta_range: Optional[Sequence[int]] = None,
    on_progress: Optional[ProgressHook] = None,
) -> list[dict]:
    """Apply one rendered pulse to lattices of size N0 + dN at constant filling.

    Rows with a backend capacity error (or any other evaluation failure) are
    recorded with their status; they do not stop the sweep.

    Returns:
        Rows (delta_sites, n_sites, n_atoms, defect_density, residual_energy_per_site,
        extrapolation, status, error)

    Raises:
        ConfigurationError: If some N0 + dN < 2
    """
    base = config.lattice_params()
    deltas = list(config.study.delta_sites if delta_range is None else delta_range)
    too_small = [d for d in deltas if base.n_sites + d < 2]
    if too_small:
        raise ConfigurationError(f"sizes N0 + dN must be >= 2; offending dN: {too_small}")
    trajectory = render_pulse(spec, time_grid(spec.t_total, config.backend.dt))

    def one(delta: int) -> dict:
        n_sites = base.n_sites + delta
        extrapolation = abs(delta) > EXTRAPOLATION_FRACTION * base.n_sites
        row = {
            "delta_sites": delta,
            "n_sites": n_sites,
            "n_atoms": math.nan,
            "extrapolation": extrapolation,
        }
        try:
            params = base.resized(n_sites)
        except ValueError as e:
            row.update(
                defect_density=math.nan,
                residual_energy_per_site=math.nan,
                status="failed",
                error=str(e),
            )
            return row
        row["n_atoms"] = params.n_atoms
        if extrapolation:
            logger.warning("dN=%d exceeds %d%% of N0=%d; treated as extrapolation", delta,
                           int(EXTRAPOLATION_FRACTION * 100), base.n_sites)
        entry = _evaluate_row(trajectory, lambda: _backend(config, params), config)
        row.update(_row_status(entry))
        return row

    rows = map_ordered(one, deltas, config.optimizer.workers, _progress(on_progress, len(deltas)))
    columns = ["delta_sites", "n_sites", "n_atoms", "defect_density", "residual_energy_per_site",
               "extrapolation", "status", "error"]
    return [{c: row[c] for c in columns} for row in rows]


def robustness_experiment(
    config: RunConfig, on_progress: Optional[ProgressHook] = None
) -> RunRecord:
    spec = fixed_pulse(config)
    record = _base_record(config, ExperimentKind.ROBUSTNESS_SWEEP)
    record.best_spec = spec
    record.best_pulse = render_pulse(spec, time_grid(spec.t_total, config.backend.dt))
    rows = robustness_sweep(spec, config, on_progress=on_progress)
    record.tables["robustness"] = rows
    for row in rows:
        if row["delta_sites"] == 0 and row["status"] == EvaluationStatus.SUCCESS.value:
            record.best_defect_density = row["defect_density"]
            record.best_residual_energy = row["residual_energy_per_site"]
    return record


def transferred_pulse(config: RunConfig) -> PulseSpec:
    """Pulse optimized on a smaller lattice of ``study.transfer_sites`` sites.

    Uses ``study.pulse_record`` when given, otherwise runs a short optimization
    with ``study.transfer_budget`` evaluations.
    """
    if config.study.pulse_record:
        return fixed_pulse(config)
    params = config.lattice_params().resized(config.study.transfer_sites)
    budget = max(config.study.transfer_budget, 2 * config.control.n_modes + 1)
    logger.info("Optimizing a transfer pulse at N=%d (budget %d)", params.n_sites, budget)
    best_spec, _ = optimize(
        config.pulse_spec(),
        _backend(config, params),
        params,
        budget=budget,
        rho_halt=config.optimizer.rho_halt,
        dt=config.backend.dt,
        restarts=config.optimizer.restarts,
        scale=config.optimizer.scale,
        kind=_merit(config),
        reference=_reference(config),
        measure=_measure(config),
        max_workers=config.optimizer.workers,
        timeout=config.backend.eval_timeout,
    )
    return best_spec


def baseline_guesses(config: RunConfig, on_progress: Optional[ProgressHook] = None) -> list[dict]:
    """Evaluate exponential, linear, seeded random-correction and transferred pulses.

    Returns:
        Rows (guess, defect_density, residual_energy_per_site, status, error)
    """
    control, seed = config.control, config.optimizer.seed
    def guess(kind: GuessKind) -> PulseSpec:
        return initial_spec(kind, control.t_total, control.n_modes, control.boundaries, seed)

    exponential = guess(GuessKind.EXPONENTIAL)
    candidates = [
        ("exponential", exponential),
        ("linear", guess(GuessKind.LINEAR)),
        ("random", random_correction(exponential, seed, config.study.random_amplitude)),
        ("transferred", transferred_pulse(config)),
    ]
    params = config.lattice_params()
    backend = _backend(config, params)

    def one(item: tuple) -> dict:
        name, spec = item
        trajectory = render_pulse(spec, time_grid(spec.t_total, config.backend.dt))
        entry = _evaluate_row(trajectory, lambda: backend, config)
        return {"guess": name, **_row_status(entry)}

    progress = _progress(on_progress, len(candidates))
    return map_ordered(one, candidates, config.optimizer.workers, progress)


def baselines_experiment(
    config: RunConfig, on_progress: Optional[ProgressHook] = None
) -> RunRecord:
    record = _base_record(config, ExperimentKind.BASELINE_GUESSES)
    record.tables["baselines"] = baseline_guesses(config, on_progress)
    return record


def convergence_study(
    spec: PulseSpec, config: RunConfig, on_progress: Optional[ProgressHook] = None
) -> list[dict]:
    """Re-evaluate one pulse over the grid bond dimension x time step x n_max.

    Returns:
        Rows (m_max, dt, n_max, defect_density, residual_energy_per_site,
        max_discarded_weight, status, error)

    Raises:
        ConfigurationError: If the configured backend is not mps
    """
    if BackendKind.from_string(config.backend.kind) is not BackendKind.MPS:
        raise ConfigurationError("convergence-study needs backend.kind = mps")
    study = config.study
    base = config.lattice_params()
    cells = [
        (m, dt, n_max)
        for n_max in study.cutoffs
        for m in study.bond_dims
        for dt in study.time_steps
    ]

    def one(cell: tuple) -> dict:
        m, dt, n_max = cell
        row = {"m_max": m, "dt": float(dt), "n_max": n_max}
        try:
            params = replace(base, n_max=n_max)
        except ValueError as e:
            return {**row, "defect_density": math.nan, "residual_energy_per_site": math.nan,
                    "status": "failed", "error": str(e), "max_discarded_weight": math.nan}
        settings = replace(config.backend.to_settings(), m_max=m)
        backend = get_backend(BackendKind.MPS, params, settings, dt=dt)
        trajectory = render_pulse(spec, time_grid(spec.t_total, dt))
        entry = _evaluate_row(trajectory, lambda: backend, config)
        discarded = backend.truncation_summary().get("max_discarded_weight", math.nan)
        return {**row, **_row_status(entry), "max_discarded_weight": float(discarded)}

    logger.info("Convergence study over %d cells", len(cells))
    return map_ordered(one, cells, config.optimizer.workers, _progress(on_progress, len(cells)))


def convergence_experiment(
    config: RunConfig, on_progress: Optional[ProgressHook] = None
) -> RunRecord:
    spec = fixed_pulse(config)
    record = _base_record(config, ExperimentKind.CONVERGENCE_STUDY)
    record.best_spec = spec
    record.tables["convergence"] = convergence_study(spec, config, on_progress)
    return record


def distortion_study(
    spec: PulseSpec, config: RunConfig, on_progress: Optional[ProgressHook] = None
) -> list[dict]:
    """Evaluate one pulse under global amplitude errors and seeded smooth noise.

    Returns:
        Rows (distortion, epsilon, defect_density, residual_energy_per_site, clamped, status, error)
    """
    study = config.study
    params = config.lattice_params()
    backend = _backend(config, params)
    nominal = render_pulse(spec, time_grid(spec.t_total, config.backend.dt))
    cases = [("amplitude", float(e), scale_trajectory(nominal, e)) for e in study.amplitude_errors]
    cases += [
        ("noise", float(e), noisy_trajectory(nominal, e, study.noise_seed))
        for e in study.noise_levels
    ]

    def one(case: tuple) -> dict:
        name, epsilon, trajectory = case
        entry = _evaluate_row(trajectory, lambda: backend, config)
        status = _row_status(entry)
        return {"distortion": name, "epsilon": epsilon,
                "defect_density": status["defect_density"],
                "residual_energy_per_site": status["residual_energy_per_site"],
                "clamped": trajectory.clamped, "status": status["status"], "error": status["error"]}

    return map_ordered(one, cases, config.optimizer.workers, _progress(on_progress, len(cases)))


def distortion_experiment(
    config: RunConfig, on_progress: Optional[ProgressHook] = None
) -> RunRecord:
    spec = fixed_pulse(config)
    record = _base_record(config, ExperimentKind.DISTORTION_STUDY)
    record.best_spec = spec
    record.best_pulse = render_pulse(spec, time_grid(spec.t_total, config.backend.dt))
    record.tables["distortion"] = distortion_study(spec, config, on_progress)
    return record


EXPERIMENTS: dict[ExperimentKind, Callable[[RunConfig, Optional[ProgressHook]], RunRecord]] = {
    ExperimentKind.OPTIMIZE: optimize_experiment,
    ExperimentKind.EVALUATE_PULSE: evaluate_pulse_experiment,
    ExperimentKind.ROBUSTNESS_SWEEP: robustness_experiment,
    ExperimentKind.BASELINE_GUESSES: baselines_experiment,
    ExperimentKind.CONVERGENCE_STUDY: convergence_experiment,
    ExperimentKind.DISTORTION_STUDY: distortion_experiment,
}


def run(
    config: RunConfig, on_progress: Optional[ProgressHook] = None, persist: bool = True
) -> RunRecord:
    """Execute the configured experiment and write its run directory.

    Args:
        config: Validated run configuration
        on_progress: Called with (completed, total) as evaluations finish
        persist: Write the record and tables to ``config.output_path``

    Returns:
        The run record
    """
    kind = config.experiment_kind
    logger.info("Running %s (config %s)", kind.value, config.hash())
    record = EXPERIMENTS[kind](config, on_progress)
    if persist:
        write_run(record, config.output_path)
    logger.info("%s finished with status %s", kind.value, record.status.value)
    return record


__all__ = [
    "EXPERIMENTS",
    "baseline_guesses",
    "convergence_study",
    "distortion_study",
    "fixed_pulse",
    "robustness_sweep",
    "run",
    "transferred_pulse",
]
