"""Simulation backends behind one interface: exact diagonalization and MPS.

Both backends prepare ground states, evolve them under a control trajectory
and measure the final site profile and energy. Ground states are cached per
J/U value; the cache is shared by concurrent evaluations.
"""

import logging
import threading
from dataclasses import dataclass
from typing import Any, Optional, Protocol

from .exact import DEFAULT_MAX_STATES, ExactEngine, count_states
from .models import BackendKind, ControlTrajectory, LatticeParams, SiteProfile
from .mps import MpsEngine, mps_expectations, mps_occupation_distribution
from .observables import site_profile

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BackendSettings:
    """
    Numerical settings shared by the backends.

    Attributes:
        kind: Which backend to build
        m_max: MPS bond dimension
        svd_cutoff: Discarded weight allowed per TEBD gate
        abort_threshold: Cumulative discarded weight that aborts a TEBD run
        max_states: Largest Fock basis the exact engine may build
        krylov_dim: Krylov space size of the exact propagator
        reference_m: Bond dimension of the MPS stand-in for E_G
        exact_reference_sites: Largest N for which E_G comes from exact diagonalization
    """

    kind: BackendKind = BackendKind.EXACT
    m_max: int = 64
    svd_cutoff: float = 1e-10
    abort_threshold: float = 1e-3
    max_states: int = DEFAULT_MAX_STATES
    krylov_dim: int = 12
    reference_m: int = 100
    exact_reference_sites: int = 12


@dataclass(frozen=True)
class Measurement:
    """Observables of a state: its site profile and <H> at the measured J/U."""

    profile: SiteProfile
    energy: float


class Backend(Protocol):
    name: str
    params: LatticeParams

    def ground_state(self, ratio: float) -> tuple[float, Any]: ...

    def evolve(
        self, state: Any, trajectory: ControlTrajectory, deadline: Optional[float] = None
    ) -> Any: ...

    def measure(self, state: Any, ratio: float) -> Measurement: ...

    def reference_ground_energy(self, ratio: float) -> tuple[float, str]: ...

    def truncation_summary(self) -> dict: ...


class _GroundStateCache:
    """Solves each J/U once; distinct ratios may solve concurrently."""

    def __init__(self, solve):
        self._solve = solve
        self._lock = threading.Lock()
        self._key_locks: dict = {}
        self._cache: dict = {}

    def get(self, ratio: float):
        key = float(ratio)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
            key_lock = self._key_locks.setdefault(key, threading.Lock())
        with key_lock:
            with self._lock:
                if key in self._cache:
                    return self._cache[key]
            value = self._solve(key)
            with self._lock:
                self._cache[key] = value
                self._key_locks.pop(key, None)
            return value


class ExactBackend:
    """Exact-diagonalization backend."""

    name = "exact"

    def __init__(self, params: LatticeParams, settings: BackendSettings = BackendSettings()):
        self.params = params
        self.settings = settings
        self.engine = ExactEngine(
            params, max_states=settings.max_states, krylov_dim=settings.krylov_dim
        )
        self._ground = _GroundStateCache(self.engine.ground_state)
        logger.info(
            "Exact backend ready: N=%d, basis size %d", params.n_sites, self.engine.basis.size
        )

    def ground_state(self, ratio: float):
        return self._ground.get(ratio)

    def evolve(self, state, trajectory: ControlTrajectory, deadline: Optional[float] = None):
        return self.engine.evolve(state, trajectory, deadline=deadline)

    def measure(self, state, ratio: float) -> Measurement:
        occupations, fluctuations = self.engine.expectation_density(state)
        distributions = self.engine.occupation_distribution(state)
        return Measurement(
            site_profile(occupations, fluctuations, self.params, distributions),
            self.engine.energy(state, ratio),
        )

    def reference_ground_energy(self, ratio: float) -> tuple[float, str]:
        energy, _ = self.ground_state(ratio)
        return energy, "exact"

    def truncation_summary(self) -> dict:
        return {}


class MpsBackend:
    """Matrix-product-state backend (DMRG ground states, TEBD evolution)."""

    name = "mps"

    def __init__(
        self, params: LatticeParams, dt: float, settings: BackendSettings = BackendSettings()
    ):
        self.params = params
        self.settings = settings
        self.engine = MpsEngine(
            params,
            m_max=settings.m_max,
            dt=dt,
            svd_cutoff=settings.svd_cutoff,
            abort_threshold=settings.abort_threshold,
        )
        self._ground = _GroundStateCache(self.engine.ground_state)
        self._reference = _GroundStateCache(self._solve_reference)
        self._exact: Optional[ExactEngine] = None
        self._lock = threading.Lock()
        self._discarded: list[float] = []

    def ground_state(self, ratio: float):
        return self._ground.get(ratio)

    def evolve(self, state, trajectory: ControlTrajectory, deadline: Optional[float] = None):
        final = self.engine.evolve(state, trajectory, deadline=deadline)
        with self._lock:
            self._discarded.append(final.discarded_weight - state.discarded_weight)
        return final

    def measure(self, state, ratio: float) -> Measurement:
        occupations, fluctuations, energy = mps_expectations(state, ratio)
        distributions = mps_occupation_distribution(state)
        return Measurement(
            site_profile(occupations, fluctuations, self.params, distributions), energy
        )

    def reference_ground_energy(self, ratio: float) -> tuple[float, str]:
        return self._reference.get(ratio)

    def _solve_reference(self, ratio: float) -> tuple[float, str]:
        params, settings = self.params, self.settings
        if params.n_sites <= settings.exact_reference_sites:
            size = count_states(params.n_sites, params.n_atoms, params.n_max)
            if size <= settings.max_states:
                if self._exact is None:
                    self._exact = ExactEngine(params, max_states=settings.max_states)
                energy, _ = self._exact.ground_state(ratio)
                return energy, "exact"
            logger.info("Basis of %d states too large for an exact E_G; using MPS", size)
        energy, _ = self.engine.ground_state(ratio, m_max=settings.reference_m)
        return energy, f"mps:m={settings.reference_m}"

    def truncation_summary(self) -> dict:
        with self._lock:
            weights = list(self._discarded)
        if not weights:
            return {"evolutions": 0}
        return {
            "evolutions": len(weights),
            "m_max": self.settings.m_max,
            "svd_cutoff": self.settings.svd_cutoff,
            "max_discarded_weight": max(weights),
            "mean_discarded_weight": sum(weights) / len(weights),
        }


def get_backend(
    kind: BackendKind,
    params: LatticeParams,
    settings: Optional[BackendSettings] = None,
    dt: float = 1e-2,
) -> Backend:
    """Build the backend of the given kind.

    Raises:
        CapacityError: If the exact backend's basis exceeds settings.max_states
        ValueError: If the kind is unknown
    """
    settings = settings or BackendSettings(kind=kind)
    if kind is BackendKind.EXACT:
        return ExactBackend(params, settings)
    if kind is BackendKind.MPS:
        return MpsBackend(params, dt, settings)
    raise ValueError(f"Unknown backend: {kind}")


__all__ = [
    "Backend",
    "BackendSettings",
    "ExactBackend",
    "Measurement",
    "MpsBackend",
    "get_backend",
]
