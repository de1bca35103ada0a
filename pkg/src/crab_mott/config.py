"""Run configuration for crab-mott.

Configuration is assembled from several sources, highest precedence first:
- Command-line flags (``--seed``, ``--backend``, ``--out``, ``--workers``, ``--set key=value``)
- Environment (``CRAB_MOTT_WORKERS``)
- A YAML or JSON configuration file
- Default values

Units: times in hbar/U, energies in U, lattice depths in recoil energies E_r,
control values in J/U, timeouts in wall-clock seconds.
"""

import json
import logging
import os
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

import yaml

from .backends import BackendSettings
from .exceptions import ConfigurationError, DomainError, ShapeError
from .lattice import depth_to_ratio
from .models import (
    BackendKind,
    DefectMeasure,
    ExperimentKind,
    GuessKind,
    LatticeParams,
    MeritKind,
    PulseSpec,
    ReferenceProfile,
    as_fraction,
)
from .pulse import initial_spec
from .utils import config_hash, expand_path

logger = logging.getLogger(__name__)

WORKERS_ENV = "CRAB_MOTT_WORKERS"


def _choice(enum_cls, value: str, name: str) -> str:
    try:
        return enum_cls.from_string(value).value
    except ValueError as e:
        raise ConfigurationError(f"{name}: {e}") from e


@dataclass
class ModelConfig:
    """Lattice: N sites, local cutoff n_max, filling, trap curvature Omega in U."""

    n_sites: int = 8
    n_max: int = 4
    filling: str = "1"
    trapped: bool = False
    trap_curvature: Optional[float] = None
    interaction: float = 1.0

    def __post_init__(self):
        try:
            self.filling = str(as_fraction(self.filling))
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigurationError(f"model.filling: {e}") from e
        try:
            self.to_params()
        except DomainError as e:
            raise ConfigurationError(f"model: {e}") from e

    def to_params(self) -> LatticeParams:
        curvature = self.trap_curvature
        if curvature is None:
            curvature = 4.0 * self.interaction / self.n_sites**2 if self.trapped else 0.0
        return LatticeParams(
            n_sites=self.n_sites,
            trap_curvature=curvature,
            interaction=self.interaction,
            n_max=self.n_max,
            filling=Fraction(self.filling),
        )


@dataclass
class ControlConfig:
    """Pulse: guess ramp, duration T (hbar/U), M modes, boundaries c(0), c(T) in J/U."""

    guess: str = "exponential"
    t_total: float = 50.0
    n_modes: int = 4
    start_ratio: float = 0.52
    end_ratio: float = 2.4e-3
    start_depth: Optional[float] = None
    end_depth: Optional[float] = None
    guess_table: list = field(default_factory=list)

    def __post_init__(self):
        self.guess = _choice(GuessKind, self.guess, "control.guess")
        if self.start_depth is not None:
            self.start_ratio = depth_to_ratio(self.start_depth)
        if self.end_depth is not None:
            self.end_ratio = depth_to_ratio(self.end_depth)
        if self.t_total <= 0:
            raise ConfigurationError("control.t_total must be positive")
        if self.n_modes < 0:
            raise ConfigurationError("control.n_modes cannot be negative")
        if self.start_ratio <= 0 or self.end_ratio <= 0:
            raise ConfigurationError("control boundaries must be positive J/U values")
        self.guess_table = [[float(t), float(c)] for t, c in self.guess_table]
        if self.guess == GuessKind.CUSTOM_TABLE.value and self.guess_table:
            self.start_ratio, self.end_ratio = self.guess_table[0][1], self.guess_table[-1][1]

    @property
    def boundaries(self) -> tuple[float, float]:
        return (self.start_ratio, self.end_ratio)

    def to_spec(self, seed: int) -> PulseSpec:
        try:
            return initial_spec(
                GuessKind.from_string(self.guess),
                self.t_total,
                self.n_modes,
                self.boundaries,
                seed,
                tuple(tuple(p) for p in self.guess_table),
            )
        except (DomainError, ShapeError) as e:
            raise ConfigurationError(f"control: {e}") from e


@dataclass
class BackendConfig:
    """Simulation backend, time step dt (hbar/U) and truncation settings."""

    kind: str = "exact"
    dt: float = 1e-2
    m_max: int = 64
    svd_cutoff: float = 1e-10
    abort_threshold: float = 1e-3
    max_states: int = 2_000_000
    reference_m: int = 100
    eval_timeout: Optional[float] = None

    def __post_init__(self):
        self.kind = _choice(BackendKind, self.kind, "backend.kind")
        if self.dt <= 0:
            raise ConfigurationError("backend.dt must be positive")
        if self.m_max < 1 or self.reference_m < 1:
            raise ConfigurationError("bond dimensions must be positive")
        if self.svd_cutoff < 0 or self.abort_threshold <= 0:
            raise ConfigurationError("backend.svd_cutoff must be >= 0 and abort_threshold > 0")
        if self.max_states <= 0:
            raise ConfigurationError("backend.max_states must be positive")
        if self.eval_timeout is not None and self.eval_timeout <= 0:
            raise ConfigurationError("backend.eval_timeout must be positive")

    def to_settings(self) -> BackendSettings:
        return BackendSettings(
            kind=BackendKind.from_string(self.kind),
            m_max=self.m_max,
            svd_cutoff=self.svd_cutoff,
            abort_threshold=self.abort_threshold,
            max_states=self.max_states,
            reference_m=self.reference_m,
        )


@dataclass
class OptimizerConfig:
    """Simplex search: evaluation budget, halting threshold, restarts and seed."""

    budget: int = 2000
    rho_halt: float = 1e-3
    restarts: int = 3
    scale: float = 0.2
    seed: int = 0
    optimize_frequencies: bool = False
    merit: str = "residual_energy_per_site"
    reference_profile: str = "filling"
    defect_measure: str = "occupation-number"
    workers: int = 1

    def __post_init__(self):
        self.merit = _choice(MeritKind, self.merit, "optimizer.merit")
        self.reference_profile = _choice(
            ReferenceProfile, self.reference_profile, "optimizer.reference_profile"
        )
        self.defect_measure = _choice(
            DefectMeasure, self.defect_measure, "optimizer.defect_measure"
        )
        if self.budget < 1:
            raise ConfigurationError("optimizer.budget must be positive")
        if not self.rho_halt > 0:
            raise ConfigurationError("optimizer.rho_halt must be positive")
        if self.restarts < 0:
            raise ConfigurationError("optimizer.restarts cannot be negative")
        if self.scale == 0:
            raise ConfigurationError("optimizer.scale must be nonzero")
        if self.workers <= 0:
            raise ConfigurationError("optimizer.workers must be positive")


@dataclass
class StudyConfig:
    """Parameter grids of the studies built on top of an optimized pulse."""

    delta_sites: list = field(default_factory=lambda: [-2, -1, 0, 1, 2])
    bond_dims: list = field(default_factory=lambda: [16, 32, 64, 100])
    time_steps: list = field(default_factory=lambda: [1e-2, 3e-3, 1e-3])
    cutoffs: list = field(default_factory=lambda: [3, 4, 5])
    transfer_sites: int = 8
    transfer_budget: int = 200
    random_amplitude: float = 0.2
    amplitude_errors: list = field(default_factory=lambda: [-0.05, -0.02, 0.0, 0.02, 0.05])
    noise_levels: list = field(default_factory=lambda: [0.02, 0.05])
    noise_seed: int = 0
    pulse_record: Optional[str] = None

    def __post_init__(self):
        self.delta_sites = [int(v) for v in self.delta_sites]
        if any(m < 1 for m in self.bond_dims) or any(dt <= 0 for dt in self.time_steps):
            raise ConfigurationError("study grids need positive bond dimensions and time steps")
        if any(c < 2 for c in self.cutoffs):
            raise ConfigurationError("study.cutoffs must be >= 2")
        if self.transfer_sites < 2 or self.transfer_budget < 1:
            raise ConfigurationError("study.transfer_sites must be >= 2 and transfer_budget >= 1")
        if any(1.0 + e <= 0 for e in self.amplitude_errors):
            raise ConfigurationError("study.amplitude_errors must stay above -1")


_SECTIONS = {
    "model": ModelConfig,
    "control": ControlConfig,
    "backend": BackendConfig,
    "optimizer": OptimizerConfig,
    "study": StudyConfig,
}


@dataclass
class RunConfig:
    """Complete, serializable description of one run."""

    experiment: str = "optimize"
    model: ModelConfig = field(default_factory=ModelConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.experiment = _choice(ExperimentKind, self.experiment, "experiment")
        self.output_dir = str(self.output_dir)

    @property
    def experiment_kind(self) -> ExperimentKind:
        return ExperimentKind.from_string(self.experiment)

    @property
    def output_path(self) -> Path:
        return expand_path(self.output_dir)

    def lattice_params(self) -> LatticeParams:
        return self.model.to_params()

    def pulse_spec(self) -> PulseSpec:
        return self.control.to_spec(self.optimizer.seed)

    def to_dict(self) -> dict:
        data: dict[str, Any] = {"experiment": self.experiment}
        for name in _SECTIONS:
            section = getattr(self, name)
            data[name] = {f.name: getattr(section, f.name) for f in fields(section)}
        data["output_dir"] = self.output_dir
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """Build a config, rejecting unknown sections and keys."""
        if not isinstance(data, dict):
            raise ConfigurationError("configuration must be a mapping")
        known = {"experiment", "output_dir", *_SECTIONS}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        kwargs: dict[str, Any] = {}
        for name, section_cls in _SECTIONS.items():
            values = data.get(name) or {}
            if not isinstance(values, dict):
                raise ConfigurationError(f"section {name!r} must be a mapping")
            allowed = {f.name for f in fields(section_cls)}
            bad = set(values) - allowed
            if bad:
                raise ConfigurationError(f"unknown keys in {name}: {', '.join(sorted(bad))}")
            try:
                kwargs[name] = section_cls(**values)
            except TypeError as e:
                raise ConfigurationError(f"{name}: {e}") from e
            except DomainError as e:
                raise ConfigurationError(f"{name}: {e}") from e
        for key in ("experiment", "output_dir"):
            if key in data:
                kwargs[key] = data[key]
        return cls(**kwargs)

    def hash(self) -> str:
        return config_hash(self.to_dict())


def load_config_data(path: Path) -> dict:
    """Read a YAML or JSON configuration file into a dictionary.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigurationError: If the file cannot be parsed
    """
    path = expand_path(str(path))
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigurationError(f"{path}: {e}") from e
    return data or {}


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``section.key=value`` overrides; values are parsed as YAML scalars."""
    result = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"override {item!r}: {e}") from e
        parts = key.strip().split(".")
        if len(parts) == 1:
            result[parts[0]] = value
        elif len(parts) == 2:
            section = result.setdefault(parts[0], {})
            if not isinstance(section, dict):
                raise ConfigurationError(f"override {item!r}: {parts[0]} is not a section")
            section[parts[1]] = value
        else:
            raise ConfigurationError(f"override key {key!r} has too many parts")
    return result


def workers_from_env() -> Optional[int]:
    """Worker count from CRAB_MOTT_WORKERS, if set."""
    raw = os.environ.get(WORKERS_ENV)
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigurationError(f"{WORKERS_ENV}={raw!r} is not an integer") from e
    if value <= 0:
        raise ConfigurationError(f"{WORKERS_ENV} must be positive")
    return value


def build_config(
    path: Optional[Path] = None,
    overrides: Sequence[str] = (),
    experiment: Optional[str] = None,
    seed: Optional[int] = None,
    backend: Optional[str] = None,
    output_dir: Optional[Path] = None,
    workers: Optional[int] = None,
    pulse_record: Optional[Path] = None,
) -> RunConfig:
    """Assemble a RunConfig from file, environment and command-line values."""
    data = load_config_data(path) if path else {}
    env_workers = workers_from_env()
    if env_workers is not None:
        data = apply_overrides(data, [f"optimizer.workers={env_workers}"])
    data = apply_overrides(data, overrides)
    flags = []
    if experiment is not None:
        flags.append(f"experiment={experiment}")
    if seed is not None:
        flags.append(f"optimizer.seed={seed}")
    if backend is not None:
        flags.append(f"backend.kind={backend}")
    if workers is not None:
        flags.append(f"optimizer.workers={workers}")
    data = apply_overrides(data, flags)
    if output_dir is not None:
        data["output_dir"] = str(output_dir)
    if pulse_record is not None:
        data.setdefault("study", {})
        data["study"] = {**data["study"], "pulse_record": str(pulse_record)}
    config = RunConfig.from_dict(data)
    logger.debug("Configuration assembled (hash %s)", config.hash())
    return config
