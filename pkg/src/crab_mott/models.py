"""
Data models for lattice parameters, control pulses, observables and run records.

This module defines the core data structures using dataclasses with
validation in ``__post_init__`` and explicit units:
times are in hbar/U, energies in U, lattice depths in recoil energies E_r.
"""

import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from fractions import Fraction
from typing import Any, Optional, Sequence, Union

import numpy as np

from .exceptions import DomainError, ShapeError

FillingLike = Union[int, float, str, Fraction]


def as_fraction(value: FillingLike) -> Fraction:
    """Convert a filling given as int, float, string or Fraction to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


class _ValueEnum(Enum):
    """Enum that can be parsed leniently from user-supplied strings."""

    @classmethod
    def from_string(cls, value: str):
        normalized = str(value).lower().strip().replace("_", "-")
        for member in cls:
            if member.value.replace("_", "-") == normalized:
                return member
        for member in cls:
            if member.name.lower().replace("_", "-") == normalized:
                return member
        valid = ", ".join(m.value for m in cls)
        raise ValueError(f"Unknown {cls.__name__} {value!r}. Valid values: {valid}")


class GuessKind(_ValueEnum):
    """Shape of the initial-guess ramp c0(t)."""

    EXPONENTIAL = "exponential"
    LINEAR = "linear"
    CUSTOM_TABLE = "custom-table"


class MeritKind(_ValueEnum):
    """Scalar objective reported by an evaluation."""

    RESIDUAL_ENERGY = "residual_energy_per_site"
    DEFECT_DENSITY = "defect_density"


class BackendKind(_ValueEnum):
    """Simulation backend."""

    EXACT = "exact"
    MPS = "mps"


class ExperimentKind(_ValueEnum):
    """Experiments the harness can run."""

    OPTIMIZE = "optimize"
    EVALUATE_PULSE = "evaluate-pulse"
    ROBUSTNESS_SWEEP = "robustness-sweep"
    BASELINE_GUESSES = "baseline-guesses"
    CONVERGENCE_STUDY = "convergence-study"
    DISTORTION_STUDY = "distortion-study"


class ReferenceProfile(_ValueEnum):
    """What the defect density is measured against."""

    FILLING = "filling"
    GROUND = "ground"


class DefectMeasure(_ValueEnum):
    """How a site's deviation from the reference is counted.

    OCCUPATION_NUMBER averages |n_i - r_i| over the site's occupation
    distribution, so doublon-hole pairs count even when <n_i> = r_i.
    MEAN_OCCUPATION compares the mean occupation only, |<n_i> - r_i|.
    """

    OCCUPATION_NUMBER = "occupation-number"
    MEAN_OCCUPATION = "mean-occupation"


class EvaluationStatus(_ValueEnum):
    """Status of a single figure-of-merit evaluation."""

    SUCCESS = "success"
    FAILED = "failed"
    TIMEOUT = "timeout"
    CAPACITY = "capacity"


class RunStatus(_ValueEnum):
    """Outcome of a run; maps onto the CLI exit status."""

    SUCCESS = "success"
    HALTED = "halted-at-threshold"
    BUDGET_EXHAUSTED = "budget-exhausted"

    @property
    def exit_code(self) -> int:
        return {RunStatus.SUCCESS: 0, RunStatus.HALTED: 2, RunStatus.BUDGET_EXHAUSTED: 3}[self]


@dataclass(frozen=True)
class LatticeParams:
    """
    Parameters of the 1D Bose-Hubbard chain.

    Attributes:
        n_sites: Number of lattice sites N (>= 2)
        trap_curvature: Harmonic trap curvature Omega in units of U (0 = homogeneous)
        interaction: On-site interaction U, the unit of energy (default 1)
        n_max: Local occupation cutoff (>= 2)
        filling: Mean atoms per site; filling * n_sites must be an integer
    """

    n_sites: int
    trap_curvature: float = 0.0
    interaction: float = 1.0
    n_max: int = 4
    filling: Fraction = Fraction(1)

    def __post_init__(self) -> None:
        object.__setattr__(self, "filling", as_fraction(self.filling))
        object.__setattr__(self, "trap_curvature", float(self.trap_curvature))
        object.__setattr__(self, "interaction", float(self.interaction))
        if self.n_sites < 2:
            raise DomainError(f"n_sites must be >= 2, got {self.n_sites}")
        if self.n_max < 2:
            raise DomainError(f"n_max must be >= 2, got {self.n_max}")
        if self.trap_curvature < 0:
            raise DomainError(f"trap_curvature cannot be negative, got {self.trap_curvature}")
        if self.interaction <= 0:
            raise DomainError(f"interaction must be positive, got {self.interaction}")
        atoms = self.filling * self.n_sites
        if atoms < 0 or atoms.denominator != 1:
            raise DomainError(
                "filling * n_sites must be a nonnegative integer, "
                f"got {self.filling} * {self.n_sites}"
            )
        if atoms > self.n_sites * self.n_max:
            raise DomainError(
                f"{atoms} atoms do not fit into {self.n_sites} sites with n_max={self.n_max}"
            )

    @classmethod
    def trapped(cls, n_sites: int, **kwargs: Any) -> "LatticeParams":
        """Build a trapped chain with the stand-in curvature Omega = 4U/N^2."""
        interaction = kwargs.get("interaction", 1.0)
        return cls(n_sites=n_sites, trap_curvature=4.0 * interaction / n_sites**2, **kwargs)

    @property
    def n_atoms(self) -> int:
        """Total atom number filling * N."""
        return int(self.filling * self.n_sites)

    @property
    def local_dim(self) -> int:
        """Dimension of the truncated local Fock space, n_max + 1."""
        return self.n_max + 1

    @property
    def is_homogeneous(self) -> bool:
        return self.trap_curvature == 0.0

    @property
    def trap_energies(self) -> np.ndarray:
        """Per-site trap energies Omega * (j - N/2)^2 for j = 1..N."""
        j = np.arange(1, self.n_sites + 1, dtype=float)
        return self.trap_curvature * (j - self.n_sites / 2.0) ** 2

    def resized(self, n_sites: int) -> "LatticeParams":
        """Same lattice at constant filling and trap curvature with a different size."""
        return replace(self, n_sites=n_sites)

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "trap_curvature": self.trap_curvature,
            "interaction": self.interaction,
            "n_max": self.n_max,
            "filling": str(self.filling),
        }


@dataclass(frozen=True)
class ControlPoint:
    """
    One point of a control trajectory.

    Attributes:
        time: Time in hbar/U
        ratio: Control value J/U (> 0)
        depth: Lattice depth V/E_r derived through the calibrated map (display only)
    """

    time: float
    ratio: float
    depth: float

    def __post_init__(self) -> None:
        if not self.ratio > 0:
            raise DomainError(f"J/U must be positive, got {self.ratio}")


@dataclass(frozen=True)
class PulseSpec:
    """
    A CRAB pulse: an initial-guess ramp times a randomized truncated Fourier correction.

    Attributes:
        guess_kind: Shape of the guess ramp c0(t)
        t_total: Total evolution time T in hbar/U
        n_modes: Number of Fourier modes M
        sin_coeffs: Sine amplitudes A_k (length M)
        cos_coeffs: Cosine amplitudes B_k (length M)
        freq_jitter: Frequency randomization r_k in [0, 1] (length M)
        boundary_values: (c(0), c(T)) in J/U, both positive
        rng_seed: Seed the jitter was drawn from
        guess_table: (t, J/U) points for the custom-table guess, empty otherwise
    """

    guess_kind: GuessKind
    t_total: float
    n_modes: int
    sin_coeffs: tuple = ()
    cos_coeffs: tuple = ()
    freq_jitter: tuple = ()
    boundary_values: tuple = (0.52, 2.4e-3)
    rng_seed: int = 0
    guess_table: tuple = ()

    def __post_init__(self) -> None:
        if isinstance(self.guess_kind, str):
            object.__setattr__(self, "guess_kind", GuessKind.from_string(self.guess_kind))
        for name in ("sin_coeffs", "cos_coeffs", "freq_jitter"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "boundary_values", tuple(float(v) for v in self.boundary_values))
        object.__setattr__(
            self, "guess_table", tuple((float(t), float(c)) for t, c in self.guess_table)
        )
        object.__setattr__(self, "t_total", float(self.t_total))

        if self.t_total <= 0:
            raise DomainError(f"t_total must be positive, got {self.t_total}")
        if self.n_modes < 0:
            raise ShapeError(f"n_modes cannot be negative, got {self.n_modes}")
        for name in ("sin_coeffs", "cos_coeffs", "freq_jitter"):
            length = len(getattr(self, name))
            if length != self.n_modes:
                raise ShapeError(f"{name} has {length} entries but n_modes is {self.n_modes}")
        if any(not 0.0 <= r <= 1.0 for r in self.freq_jitter):
            raise DomainError("freq_jitter entries must lie in [0, 1]")
        if len(self.boundary_values) != 2:
            raise ShapeError("boundary_values must hold exactly (c(0), c(T))")
        if self.guess_kind is GuessKind.CUSTOM_TABLE:
            self._validate_table()

    def _validate_table(self) -> None:
        table = self.guess_table
        if len(table) < 2:
            raise ShapeError("custom-table guess needs at least two (t, J/U) points")
        times = [t for t, _ in table]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("custom-table times must be strictly increasing")
        if times[0] != 0.0 or not math.isclose(times[-1], self.t_total, rel_tol=1e-12):
            raise DomainError("custom-table must span [0, T]")
        if any(c <= 0 for _, c in table):
            raise DomainError("custom-table values must be positive")
        if (table[0][1], table[-1][1]) != self.boundary_values:
            raise DomainError("boundary_values must equal the first and last table values")

    @property
    def frequencies(self) -> np.ndarray:
        """Randomized harmonics nu_k = 2 pi k (1 + r_k) / T."""
        k = np.arange(1, self.n_modes + 1, dtype=float)
        return 2.0 * np.pi * k * (1.0 + np.asarray(self.freq_jitter, dtype=float)) / self.t_total

    def coefficient_vector(self, include_frequencies: bool = False) -> np.ndarray:
        """Optimization variable (A_1..A_M, B_1..B_M[, r_1..r_M])."""
        parts = [self.sin_coeffs, self.cos_coeffs]
        if include_frequencies:
            parts.append(self.freq_jitter)
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def with_coefficients(
        self, vector: Sequence[float], include_frequencies: bool = False
    ) -> "PulseSpec":
        """Return a copy carrying the coefficients of an optimization vector.

        When frequencies are optimized the jitter part is folded back into [0, 1].
        """
        vector = np.asarray(vector, dtype=float)
        m = self.n_modes
        expected = 3 * m if include_frequencies else 2 * m
        if vector.shape != (expected,):
            raise ShapeError(
                f"expected a coefficient vector of length {expected}, got {vector.shape}"
            )
        changes: dict = {"sin_coeffs": tuple(vector[:m]), "cos_coeffs": tuple(vector[m : 2 * m])}
        if include_frequencies:
            changes["freq_jitter"] = tuple(_fold_unit_interval(vector[2 * m :]))
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "guess_kind": self.guess_kind.value,
            "t_total": self.t_total,
            "n_modes": self.n_modes,
            "sin_coeffs": list(self.sin_coeffs),
            "cos_coeffs": list(self.cos_coeffs),
            "freq_jitter": list(self.freq_jitter),
            "boundary_values": list(self.boundary_values),
            "rng_seed": self.rng_seed,
            "guess_table": [list(p) for p in self.guess_table],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSpec":
        return cls(
            guess_kind=GuessKind.from_string(data["guess_kind"]),
            t_total=data["t_total"],
            n_modes=data["n_modes"],
            sin_coeffs=data.get("sin_coeffs", ()),
            cos_coeffs=data.get("cos_coeffs", ()),
            freq_jitter=data.get("freq_jitter", ()),
            boundary_values=data["boundary_values"],
            rng_seed=data.get("rng_seed", 0),
            guess_table=data.get("guess_table", ()),
        )


def _fold_unit_interval(values: np.ndarray) -> np.ndarray:
    """Reflect arbitrary reals into [0, 1] (triangle wave), keeping the map continuous."""
    folded = np.mod(values, 2.0)
    return np.where(folded > 1.0, 2.0 - folded, folded)


@dataclass
class ControlTrajectory:
    """
    A control pulse J/U(t) sampled on a uniform time grid.

    Attributes:
        times: Grid points 0 = t_0 < ... < t_n = T
        values: J/U at the grid points
        midpoint_values: J/U at t_k + dt/2 (length n), if rendered
        clamped: True when samples were lifted to the positivity floor
    """

    times: np.ndarray
    values: np.ndarray
    midpoint_values: Optional[np.ndarray] = None
    clamped: bool = False

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or self.times.shape != self.values.shape:
            raise ShapeError("times and values must be 1D arrays of equal length")
        if self.midpoint_values is not None:
            self.midpoint_values = np.asarray(self.midpoint_values, dtype=float)
            if self.midpoint_values.shape != (max(len(self.times) - 1, 0),):
                raise ShapeError("midpoint_values must hold one value per step")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise DomainError("control trajectory must be sampled on a uniform grid")

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        """Grid spacing (0 for a zero-duration trajectory)."""
        if self.n_steps == 0:
            return 0.0
        return float(self.times[1] - self.times[0])

    @property
    def t_total(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def start(self) -> float:
        return float(self.values[0])

    @property
    def end(self) -> float:
        return float(self.values[-1])

    def step_ratios(self) -> np.ndarray:
        """J/U used on each step: the midpoint sample, or the endpoint average if absent."""
        if self.midpoint_values is not None:
            return self.midpoint_values
        return 0.5 * (self.values[:-1] + self.values[1:])

    def reversed(self) -> "ControlTrajectory":
        """The same pulse played backwards on the same grid."""
        mid = None if self.midpoint_values is None else self.midpoint_values[::-1].copy()
        return ControlTrajectory(self.times.copy(), self.values[::-1].copy(), mid, self.clamped)


@dataclass(frozen=True)
class SiteProfile:
    """
    Per-site occupations and number fluctuations of a final state.

    Attributes:
        occupations: <n_i> for i = 1..N
        fluctuations: <n_i^2> - <n_i>^2 for i = 1..N
        n_sites: Number of sites N
        filling: Nominal filling (atoms per site)
        distributions: Per-site probabilities p_i(n), n = 0..n_max; empty if not measured
    """

    occupations: tuple
    fluctuations: tuple
    n_sites: int
    filling: Fraction = Fraction(1)
    distributions: tuple = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "occupations", tuple(float(v) for v in self.occupations))
        object.__setattr__(self, "fluctuations", tuple(float(v) for v in self.fluctuations))
        object.__setattr__(self, "filling", as_fraction(self.filling))
        if len(self.occupations) != self.n_sites or len(self.fluctuations) != self.n_sites:
            raise ShapeError("profile vectors must have one entry per site")
        total = float(self.filling * self.n_sites)
        if abs(sum(self.occupations) - total) > 1e-8:
            raise DomainError(
                f"occupations sum to {sum(self.occupations):.12f}, expected {total} atoms"
            )
        if min(self.fluctuations) < -1e-12:
            raise DomainError(f"negative number fluctuation {min(self.fluctuations):.3e}")
        if len(self.distributions):
            dist = tuple(tuple(float(p) for p in site) for site in self.distributions)
            object.__setattr__(self, "distributions", dist)
            if len(dist) != self.n_sites or len({len(site) for site in dist}) != 1:
                raise ShapeError("distributions must hold one equal-length row per site")
            if any(abs(sum(site) - 1.0) > 1e-8 for site in dist):
                raise DomainError("occupation distributions must sum to 1 on every site")

    @property
    def occupation_array(self) -> np.ndarray:
        return np.asarray(self.occupations)

    @property
    def fluctuation_array(self) -> np.ndarray:
        return np.asarray(self.fluctuations)

    @property
    def distribution_array(self) -> Optional[np.ndarray]:
        """(N, n_max + 1) array of p_i(n), or None when not measured."""
        return np.asarray(self.distributions) if self.distributions else None

    def reflected(self) -> "SiteProfile":
        """Profile of the mirrored lattice j -> N + 1 - j."""
        return replace(
            self,
            occupations=self.occupations[::-1],
            fluctuations=self.fluctuations[::-1],
            distributions=self.distributions[::-1],
        )

    def to_dict(self) -> dict:
        data = {
            "occupations": list(self.occupations),
            "fluctuations": list(self.fluctuations),
            "n_sites": self.n_sites,
            "filling": str(self.filling),
        }
        if self.distributions:
            data["distributions"] = [list(site) for site in self.distributions]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SiteProfile":
        return cls(
            occupations=data["occupations"],
            fluctuations=data["fluctuations"],
            n_sites=data["n_sites"],
            filling=as_fraction(data["filling"]),
            distributions=tuple(tuple(site) for site in data.get("distributions", ())),
        )


@dataclass(frozen=True)
class FigureOfMerit:
    """
    Result of evaluating one pulse.

    Attributes:
        kind: Which quantity ``value`` reports
        defect_density: rho, the mean per-site deviation from the reference profile
        residual_energy_per_site: (E(T) - E_G) / N
        profile: Final-state site profile (auxiliary snapshot)
        final_energy: E(T) = <H(c(T))> on the evolved state
        ground_energy: E_G, ground-state energy at c(T)
        pulse_clamped: True when the rendered pulse hit the positivity floor
    """

    kind: MeritKind
    defect_density: float
    residual_energy_per_site: float
    profile: SiteProfile
    final_energy: float = math.nan
    ground_energy: float = math.nan
    pulse_clamped: bool = False

    def __post_init__(self) -> None:
        if self.defect_density < 0:
            raise DomainError(f"defect density cannot be negative, got {self.defect_density}")
        if self.residual_energy_per_site < -1e-9:
            raise DomainError(
                f"residual energy per site {self.residual_energy_per_site:.3e} "
                "below the variational floor"
            )

    @property
    def value(self) -> float:
        if self.kind is MeritKind.DEFECT_DENSITY:
            return self.defect_density
        return self.residual_energy_per_site

    @property
    def auxiliary(self) -> SiteProfile:
        return self.profile


@dataclass
class EvaluationRecord:
    """
    One entry of an optimization trace.

    Attributes:
        index: Position in the trace (0-based)
        coefficients: Optimization vector that was evaluated
        status: Evaluation status
        defect_density: rho (NaN unless successful)
        residual_energy_per_site: Delta E / N (NaN unless successful)
        restart: Restart round the evaluation belongs to
        wall_time: Seconds spent in the evaluation
        error: Error message if the evaluation failed
        merit: Full figure of merit if successful
    """

    index: int
    coefficients: tuple
    status: EvaluationStatus
    defect_density: float = math.nan
    residual_energy_per_site: float = math.nan
    restart: int = 0
    wall_time: float = 0.0
    error: str = ""
    merit: Optional[FigureOfMerit] = field(default=None, repr=False, compare=False)

    @property
    def is_success(self) -> bool:
        return self.status is EvaluationStatus.SUCCESS

    @property
    def objective(self) -> float:
        """Value minimized by the simplex; failures count as +inf."""
        if not self.is_success:
            return math.inf
        return self.residual_energy_per_site

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "coefficients": list(self.coefficients),
            "status": self.status.value,
            "defect_density": self.defect_density,
            "residual_energy_per_site": self.residual_energy_per_site,
            "restart": self.restart,
            "wall_time": self.wall_time,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvaluationRecord":
        return cls(
            index=data["index"],
            coefficients=tuple(data["coefficients"]),
            status=EvaluationStatus.from_string(data["status"]),
            defect_density=data["defect_density"],
            residual_energy_per_site=data["residual_energy_per_site"],
            restart=data.get("restart", 0),
            wall_time=data.get("wall_time", 0.0),
            error=data.get("error", ""),
        )


@dataclass
class RunRecord:
    """
    Persisted result of one harness run.

    Attributes:
        experiment: Experiment that produced the record
        config_snapshot: Full run configuration as a dictionary
        config_hash: Hash of the configuration snapshot
        seed: Optimizer seed
        version: crab-mott version tag
        status: Run outcome
        evaluation_trace: Every evaluation in order
        best_spec: Best pulse found (or the evaluated pulse)
        best_pulse: best_spec rendered on the run grid
        final_profile: Site profile of the best pulse's final state
        truncation_summary: Discarded-weight statistics (MPS runs)
        ground_reference: How E_G was obtained ("exact" or "mps:m=<m>")
        tables: Study tables by name, each a list of row dictionaries
        created: Creation time stamp
    """

    experiment: ExperimentKind
    config_snapshot: dict
    config_hash: str
    seed: int
    version: str
    status: RunStatus = RunStatus.SUCCESS
    evaluation_trace: list = field(default_factory=list)
    best_spec: Optional[PulseSpec] = None
    best_pulse: Optional[ControlTrajectory] = field(default=None, repr=False)
    final_profile: Optional[SiteProfile] = None
    best_defect_density: float = math.nan
    best_residual_energy: float = math.nan
    truncation_summary: dict = field(default_factory=dict)
    ground_reference: str = ""
    tables: dict = field(default_factory=dict)
    created: datetime = field(default_factory=datetime.now)

    def best_so_far(self) -> list[float]:
        """Running minimum of the optimized quantity over the trace."""
        optimizer = self.config_snapshot.get("optimizer", {})
        merit = optimizer.get("merit", MeritKind.RESIDUAL_ENERGY.value)
        by_density = MeritKind.from_string(merit) is MeritKind.DEFECT_DENSITY
        values, current = [], math.inf
        for entry in self.evaluation_trace:
            value = entry.objective
            if by_density and entry.is_success:
                value = entry.defect_density
            current = min(current, value)
            values.append(current)
        return values

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment.value,
            "config_hash": self.config_hash,
            "config_snapshot": self.config_snapshot,
            "seed": self.seed,
            "version": self.version,
            "status": self.status.value,
            "best_spec": self.best_spec.to_dict() if self.best_spec else None,
            "best_defect_density": self.best_defect_density,
            "best_residual_energy": self.best_residual_energy,
            "final_profile": self.final_profile.to_dict() if self.final_profile else None,
            "truncation_summary": self.truncation_summary,
            "ground_reference": self.ground_reference,
            "tables": self.tables,
            "evaluation_trace": [entry.to_dict() for entry in self.evaluation_trace],
            "created": self.created.isoformat(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(
            experiment=ExperimentKind.from_string(data["experiment"]),
            config_snapshot=data["config_snapshot"],
            config_hash=data["config_hash"],
            seed=data["seed"],
            version=data["version"],
            status=RunStatus.from_string(data["status"]),
            evaluation_trace=[EvaluationRecord.from_dict(e) for e in data["evaluation_trace"]],
            best_spec=PulseSpec.from_dict(data["best_spec"]) if data.get("best_spec") else None,
            final_profile=(
                SiteProfile.from_dict(data["final_profile"]) if data.get("final_profile") else None
            ),
            best_defect_density=data.get("best_defect_density", math.nan),
            best_residual_energy=data.get("best_residual_energy", math.nan),
            truncation_summary=data.get("truncation_summary", {}),
            ground_reference=data.get("ground_reference", ""),
            tables=data.get("tables", {}),
            created=datetime.fromisoformat(data["created"]),
        )
