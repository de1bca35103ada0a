"""CRAB optimization: figure-of-merit evaluation and simplex search with restarts.

The search minimizes the residual energy per site over the Fourier
coefficients (A_k, B_k), optionally also over the frequency jitter r_k, and
halts as soon as an evaluation reaches defect density <= rho_halt. When the
simplex collapses without reaching the threshold, the jitter is redrawn and
the search restarts from the best point found so far.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .backends import Backend
from .exceptions import ConfigurationError, CrabError, DomainError
from .executor import EvaluationStats, evaluate_points
from .models import (
    ControlTrajectory,
    DefectMeasure,
    EvaluationRecord,
    FigureOfMerit,
    LatticeParams,
    MeritKind,
    PulseSpec,
    ReferenceProfile,
    RunStatus,
)
from .observables import defect_density, residual_energy_per_site
from .pulse import draw_jitter, render_pulse, time_grid
from .simplex import SearchStopped, SimplexStatus, minimize

logger = logging.getLogger(__name__)


def evaluate_trajectory(
    trajectory: ControlTrajectory,
    backend: Backend,
    kind: MeritKind = MeritKind.RESIDUAL_ENERGY,
    reference: ReferenceProfile = ReferenceProfile.FILLING,
    deadline: Optional[float] = None,
    measure: DefectMeasure = DefectMeasure.OCCUPATION_NUMBER,
) -> FigureOfMerit:
    """Start in the ground state at c(0), evolve under the trajectory, measure at c(T)."""
    _, initial = backend.ground_state(trajectory.start)
    final = backend.evolve(initial, trajectory, deadline=deadline)
    measured = backend.measure(final, trajectory.end)
    ground_energy, _ = backend.reference_ground_energy(trajectory.end)

    target = None
    if reference is ReferenceProfile.GROUND:
        _, ground = backend.ground_state(trajectory.end)
        target = backend.measure(ground, trajectory.end).profile.occupations
    n_sites = backend.params.n_sites
    return FigureOfMerit(
        kind=kind,
        defect_density=defect_density(measured.profile, target, measure),
        residual_energy_per_site=residual_energy_per_site(measured.energy, ground_energy, n_sites),
        profile=measured.profile,
        final_energy=measured.energy,
        ground_energy=ground_energy,
        pulse_clamped=trajectory.clamped,
    )


def evaluate(
    spec: PulseSpec,
    backend: Backend,
    params: LatticeParams,
    dt: float,
    kind: MeritKind = MeritKind.RESIDUAL_ENERGY,
    reference: ReferenceProfile = ReferenceProfile.FILLING,
    deadline: Optional[float] = None,
    measure: DefectMeasure = DefectMeasure.OCCUPATION_NUMBER,
) -> FigureOfMerit:
    """Figure of merit of one pulse.

    Raises:
        DomainError: If the backend was built for other lattice parameters
        CrabError: Backend failures, annotated with the coefficient vector
    """
    if backend.params != params:
        raise DomainError("backend was built for different lattice parameters")
    trajectory = render_pulse(spec, time_grid(spec.t_total, dt))
    try:
        return evaluate_trajectory(trajectory, backend, kind, reference, deadline, measure)
    except CrabError as exc:
        exc.add_note(f"coefficients: {spec.coefficient_vector(include_frequencies=True).tolist()}")
        raise


@dataclass
class OptimizationOutcome:
    """
    Result of a CRAB optimization.

    Attributes:
        status: Why the search ended
        trace: Every evaluation, in recorded order
        best_record: Successful evaluation with the lowest objective, or on a
            halted run the evaluation that reached the threshold
        restarts: Number of restarts performed
        stats: Evaluation statistics
    """

    status: RunStatus
    trace: list = field(default_factory=list)
    best_record: Optional[EvaluationRecord] = None
    restarts: int = 0
    stats: EvaluationStats = field(default_factory=EvaluationStats)

    @property
    def n_evaluations(self) -> int:
        return len(self.trace)


class _TraceRecorder:
    """Serial sink for evaluation records; enforces the halting threshold in trace order."""

    def __init__(self, kind: MeritKind, rho_halt: float):
        self.kind = kind
        self.rho_halt = rho_halt  # inf disables halting
        self.trace: list[EvaluationRecord] = []
        self.best: Optional[EvaluationRecord] = None
        self.best_spec: Optional[PulseSpec] = None
        self.halted = False

    def objective(self, entry: EvaluationRecord) -> float:
        if not entry.is_success:
            return math.inf
        if self.kind is MeritKind.DEFECT_DENSITY:
            return entry.defect_density
        return entry.residual_energy_per_site

    def add(self, records: list, specs: list, restart: int) -> list[float]:
        values = []
        for entry, spec in zip(records, specs):
            entry.index = len(self.trace)
            entry.restart = restart
            self.trace.append(entry)
            value = self.objective(entry)
            values.append(value)
            if self.best is None or value < self.objective(self.best):
                self.best, self.best_spec = entry, spec
            reached = entry.is_success and entry.defect_density <= self.rho_halt
            if reached and math.isfinite(self.rho_halt):
                self.best, self.best_spec = entry, spec
                logger.info(
                    "Defect density %.3e reached the threshold %.3e at evaluation %d",
                    entry.defect_density, self.rho_halt, entry.index,
                )
                self.halted = True
                raise SearchStopped
        return values


def optimize(
    initial: PulseSpec,
    backend: Backend,
    params: LatticeParams,
    budget: int,
    rho_halt: float,
    dt: float,
    restarts: int = 3,
    scale: float = 0.2,
    optimize_frequencies: bool = False,
    spread_tol: float = 1e-10,
    kind: MeritKind = MeritKind.RESIDUAL_ENERGY,
    reference: ReferenceProfile = ReferenceProfile.FILLING,
    measure: DefectMeasure = DefectMeasure.OCCUPATION_NUMBER,
    max_workers: int = 1,
    timeout: Optional[float] = None,
    progress_callback: Optional[Callable[[EvaluationStats, EvaluationRecord], None]] = None,
) -> tuple[PulseSpec, OptimizationOutcome]:
    """Run the CRAB search from ``initial``.

    Args:
        initial: Starting pulse; its coefficients are the first vertex
        backend: Simulation backend built for ``params``
        params: Lattice parameters
        budget: Maximum number of evaluations over all restarts
        rho_halt: Defect density at which the search halts
        dt: Time step in hbar/U
        restarts: Maximum number of restarts after a collapsed simplex
        scale: Initial simplex displacement per coordinate
        optimize_frequencies: Also optimize the jitter r_k (3M parameters)
        spread_tol: Value spread below which the simplex counts as collapsed
        kind: Quantity minimized
        reference: Reference profile for the defect density
        measure: How the defect density counts deviations
        max_workers: Concurrent evaluations in batch steps
        timeout: Wall-clock budget per evaluation in seconds
        progress_callback: Called with (stats, record) after each evaluation

    Returns:
        (best pulse, outcome with the full trace)

    Raises:
        ConfigurationError: If budget < dimension + 1 or rho_halt <= 0
    """
    dim = (3 if optimize_frequencies else 2) * initial.n_modes
    if dim == 0:
        raise ConfigurationError("n_modes must be at least 1 to optimize")
    if budget < dim + 1:
        raise ConfigurationError(f"budget {budget} is below dimension + 1 = {dim + 1}")
    if not rho_halt > 0:
        raise ConfigurationError(f"rho_halt must be positive, got {rho_halt}")
    if backend.params != params:
        raise DomainError("backend was built for different lattice parameters")

    recorder = _TraceRecorder(kind, rho_halt)
    stats = EvaluationStats()
    current = initial
    restart = 0
    status = RunStatus.BUDGET_EXHAUSTED

    while True:
        base = current

        def evaluate_one(
            point: np.ndarray, deadline: Optional[float], base: PulseSpec = base
        ) -> FigureOfMerit:
            spec = base.with_coefficients(point, include_frequencies=optimize_frequencies)
            return evaluate(spec, backend, params, dt, kind, reference, deadline, measure)

        def batch(points: list, base: PulseSpec = base, restart: int = restart) -> list[float]:
            records = evaluate_points(
                evaluate_one, points, max_workers, timeout, stats, progress_callback
            )
            specs = [
                base.with_coefficients(p, include_frequencies=optimize_frequencies) for p in points
            ]
            return recorder.add(records, specs, restart)

        remaining = budget - len(recorder.trace)
        x0 = current.coefficient_vector(include_frequencies=optimize_frequencies)
        result = minimize(batch, x0, remaining, scale=scale, spread_tol=spread_tol)

        if result.status is SimplexStatus.STOPPED:
            status = RunStatus.HALTED
            break
        if result.status is SimplexStatus.BUDGET_EXHAUSTED:
            status = RunStatus.BUDGET_EXHAUSTED
            break
        if restart >= restarts or budget - len(recorder.trace) < dim + 1:
            status = RunStatus.SUCCESS
            break

        restart += 1
        best = recorder.best_spec or current
        current = replace(best, freq_jitter=draw_jitter(best.n_modes, best.rng_seed, restart))
        logger.info(
            "Simplex collapsed after %d evaluations; restart %d with fresh frequency jitter",
            len(recorder.trace), restart,
        )

    best_spec = recorder.best_spec if recorder.best_spec is not None else initial
    outcome = OptimizationOutcome(
        status=status,
        trace=recorder.trace,
        best_record=recorder.best,
        restarts=restart,
        stats=stats,
    )
    best_value = recorder.objective(recorder.best) if recorder.best else math.inf
    logger.info(
        "Optimization finished (%s) after %d evaluations: best objective %.6e",
        status.value, outcome.n_evaluations, best_value,
    )
    return best_spec, outcome
