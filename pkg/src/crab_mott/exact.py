"""Number-conserving exact-diagonalization engine.

The Fock basis of the fixed-atom-number sector is enumerated in lexicographic
order. Each state is also identified by an integer key, its occupations read as
base-(n_max + 1) digits with site 1 most significant; keys are therefore sorted
and double as indices into the full product space.

H(J) = J * K + D is stored as a sparse hopping matrix K and a diagonal D built
once per (basis, Omega) and rescaled by J on every step.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .exceptions import CapacityError, ConvergenceError, DomainError, EvaluationTimeoutError
from .krylov import expm_krylov, lowest_eigenpair, residual_norm
from .models import ControlTrajectory, LatticeParams

logger = logging.getLogger(__name__)

DEFAULT_MAX_STATES = 2_000_000


def count_states(n_sites: int, n_atoms: int, n_max: int) -> int:
    """Number of ways to place n_atoms on n_sites with at most n_max per site."""
    total = 0
    for k in range(n_sites + 1):
        remaining = n_atoms - k * (n_max + 1)
        if remaining < 0:
            break
        total += (-1) ** k * math.comb(n_sites, k) * math.comb(remaining + n_sites - 1, n_sites - 1)
    return total


@lru_cache(maxsize=256)
def _compositions(n_sites: int, n_atoms: int, n_max: int) -> np.ndarray:
    if n_sites == 1:
        if n_atoms <= n_max:
            return np.array([[n_atoms]], dtype=np.int8)
        return np.empty((0, 1), dtype=np.int8)
    blocks = []
    for first in range(min(n_max, n_atoms) + 1):
        rest = _compositions(n_sites - 1, n_atoms - first, n_max)
        if len(rest):
            head = np.full((len(rest), 1), first, dtype=np.int8)
            blocks.append(np.hstack([head, rest]))
    if not blocks:
        return np.empty((0, n_sites), dtype=np.int8)
    return np.vstack(blocks)


@dataclass(frozen=True, eq=False)
class FockBasis:
    """
    Canonical Fock basis of one particle-number sector.

    Attributes:
        n_sites: Number of sites
        n_atoms: Number of atoms
        n_max: Local occupation cutoff
        occupations: (size, n_sites) array of occupations, lexicographically sorted
        keys: Base-(n_max + 1) integer key of every state, ascending
    """

    n_sites: int
    n_atoms: int
    n_max: int
    occupations: np.ndarray = field(repr=False)
    keys: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.keys)

    def __len__(self) -> int:
        return self.size

    @property
    def local_dim(self) -> int:
        return self.n_max + 1

    @property
    def place_values(self) -> np.ndarray:
        """Key weight of a single atom on each site."""
        return self.local_dim ** np.arange(self.n_sites - 1, -1, -1, dtype=np.int64)

    @property
    def states(self) -> list[tuple]:
        """Occupation tuples in canonical order."""
        return [tuple(int(n) for n in row) for row in self.occupations]

    @cached_property
    def index(self) -> dict:
        """Map from occupation tuple to ordinal."""
        return {state: i for i, state in enumerate(self.states)}

    def lookup(self, keys: np.ndarray) -> np.ndarray:
        """Ordinals of the given keys, -1 where a key is not in the basis."""
        keys = np.asarray(keys, dtype=np.int64)
        pos = np.searchsorted(self.keys, keys)
        clipped = np.minimum(pos, self.size - 1)
        found = self.keys[clipped] == keys
        return np.where(found, clipped, -1)

    def index_of(self, occupation) -> int:
        key = int(np.dot(np.asarray(occupation, dtype=np.int64), self.place_values))
        ordinal = int(self.lookup(np.array([key]))[0])
        if ordinal < 0 or tuple(occupation) != self.states[ordinal]:
            raise KeyError(f"occupation {tuple(occupation)} is not in this basis")
        return ordinal


def build_basis(params: LatticeParams, max_states: int = DEFAULT_MAX_STATES) -> FockBasis:
    """Enumerate the Fock basis of the sector with params.n_atoms atoms.

    Raises:
        CapacityError: If the basis would exceed ``max_states``
    """
    return sector_basis(params.n_sites, params.n_atoms, params.n_max, max_states)


def sector_basis(
    n_sites: int, n_atoms: int, n_max: int, max_states: int = DEFAULT_MAX_STATES
) -> FockBasis:
    """Enumerate all occupations of n_sites summing to n_atoms with entries <= n_max."""
    if n_sites < 1 or n_atoms < 0 or n_max < 1:
        raise DomainError(f"invalid sector N={n_sites}, atoms={n_atoms}, n_max={n_max}")
    size = count_states(n_sites, n_atoms, n_max)
    if size > max_states:
        raise CapacityError(required=size, limit=max_states)
    if size == 0:
        raise DomainError(f"{n_atoms} atoms do not fit into {n_sites} sites with n_max={n_max}")
    if n_sites * math.log2(n_max + 1) > 62:
        raise DomainError("lattice too large for 64-bit Fock keys")
    occupations = _compositions(n_sites, n_atoms, n_max)
    occupations.setflags(write=False)
    basis = FockBasis(
        n_sites=n_sites,
        n_atoms=n_atoms,
        n_max=n_max,
        occupations=occupations,
        keys=np.empty(0, dtype=np.int64),
    )
    keys = occupations.astype(np.int64) @ basis.place_values
    keys.setflags(write=False)
    object.__setattr__(basis, "keys", keys)
    logger.debug(
        "Built Fock basis: N=%d, atoms=%d, n_max=%d, size=%d", n_sites, n_atoms, n_max, size
    )
    return basis


class ExactHamiltonian:
    """Sparse Bose-Hubbard Hamiltonian on a Fock basis, split as H(J) = J*K + D."""

    def __init__(self, basis: FockBasis, params: LatticeParams):
        if (basis.n_sites, basis.n_atoms, basis.n_max) != (
            params.n_sites, params.n_atoms, params.n_max,
        ):
            raise DomainError("basis does not belong to these lattice parameters")
        self.basis = basis
        self.params = params
        occ = basis.occupations.astype(float)
        trap = occ @ params.trap_energies
        interaction = 0.5 * params.interaction * np.sum(occ * occ - occ, axis=1)
        self.diagonal = trap + interaction
        self.kinetic = self._assemble_hopping()

    def _assemble_hopping(self) -> sp.csr_matrix:
        basis = self.basis
        occ = basis.occupations
        weights = basis.place_values
        rows, cols, vals = [], [], []
        for j in range(basis.n_sites - 1):
            src = np.flatnonzero((occ[:, j + 1] > 0) & (occ[:, j] < basis.n_max))
            dst = basis.lookup(basis.keys[src] + weights[j] - weights[j + 1])
            if np.any(dst < 0):
                raise RuntimeError("hopping term left the particle-number sector")
            amp = np.sqrt((occ[src, j].astype(float) + 1.0) * occ[src, j + 1].astype(float))
            rows.append(dst)
            cols.append(src)
            vals.append(amp)
        size = basis.size
        if rows:
            forward = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(size, size),
            ).tocsr()
        else:
            forward = sp.csr_matrix((size, size))
        return -(forward + forward.T).tocsr() * self.params.interaction

    def matrix(self, ratio: float) -> sp.csr_matrix:
        """Assembled sparse H at J/U = ratio."""
        return (ratio * self.kinetic + sp.diags(self.diagonal)).tocsr()

    def matvec(self, ratio: float):
        """Return a function computing H(ratio) @ v in O(nonzeros)."""
        kinetic, diagonal = self.kinetic, self.diagonal

        def apply(vector: np.ndarray) -> np.ndarray:
            return ratio * (kinetic @ vector) + diagonal * vector

        return apply


@dataclass
class QuantumStateED:
    """
    State vector over a number-conserving Fock basis.

    Attributes:
        basis: Fock basis the amplitudes refer to
        amplitudes: Complex amplitudes, one per basis state
        params: Lattice parameters the state was prepared for
    """

    basis: FockBasis
    amplitudes: np.ndarray
    params: LatticeParams

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.size,):
            raise DomainError("amplitude vector does not match the basis size")

    @classmethod
    def from_occupation(
        cls, basis: FockBasis, params: LatticeParams, occupation
    ) -> "QuantumStateED":
        """The Fock state with the given occupations."""
        amplitudes = np.zeros(basis.size, dtype=complex)
        amplitudes[basis.index_of(occupation)] = 1.0
        return cls(basis, amplitudes, params)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "QuantumStateED") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def copy(self) -> "QuantumStateED":
        return QuantumStateED(self.basis, self.amplitudes.copy(), self.params)

    def conjugate(self) -> "QuantumStateED":
        """Complex conjugate, i.e. the time-reversed state for a real Hamiltonian."""
        return QuantumStateED(self.basis, self.amplitudes.conj(), self.params)

    def to_full_vector(self) -> np.ndarray:
        """Embed into the full d^N product space (small N only)."""
        full = np.zeros(self.basis.local_dim**self.basis.n_sites, dtype=complex)
        full[self.basis.keys] = self.amplitudes
        return full


class ExactEngine:
    """
    Exact-diagonalization backend for one lattice.

    The basis and the sparse Hamiltonian structure are immutable after
    construction and may be shared by concurrent evolutions.

    Example:
        >>> engine = ExactEngine(LatticeParams(n_sites=4))
        >>> energy, state = engine.ground_state(0.52)
        >>> occupations, fluctuations = engine.expectation_density(state)
    """

    def __init__(
        self,
        params: LatticeParams,
        max_states: int = DEFAULT_MAX_STATES,
        krylov_dim: int = 12,
        krylov_tol: float = 1e-12,
        residual_tol: float = 1e-9,
        max_attempts: int = 3,
        maxiter: Optional[int] = None,
        basis: Optional[FockBasis] = None,
    ):
        self.params = params
        self.basis = basis if basis is not None else build_basis(params, max_states)
        self.hamiltonian = ExactHamiltonian(self.basis, params)
        self.krylov_dim = krylov_dim
        self.krylov_tol = krylov_tol
        self.residual_tol = residual_tol
        self.max_attempts = max_attempts
        self.maxiter = maxiter

    def ground_state(self, ratio: float) -> tuple[float, QuantumStateED]:
        """Lowest eigenpair of H(ratio).

        Raises:
            ConvergenceError: If the eigen-solver fails or the residual is too large
        """
        if ratio < 0:
            raise DomainError(f"J/U must be nonnegative, got {ratio}")
        matrix = self.hamiltonian.matrix(ratio)
        v0 = np.ones(self.basis.size) / math.sqrt(self.basis.size)
        energy, vector = lowest_eigenpair(
            matrix, v0=v0, max_attempts=self.max_attempts, maxiter=self.maxiter
        )
        residual = residual_norm(matrix, energy, vector)
        if residual > self.residual_tol:
            raise ConvergenceError("ground state residual above tolerance", residual=residual)
        logger.debug(
            "ED ground state at J/U=%.6g: E=%.12f (residual %.2e)", ratio, energy, residual
        )
        return energy, QuantumStateED(self.basis, vector.astype(complex), self.params)

    def evolve(
        self,
        state: QuantumStateED,
        trajectory: ControlTrajectory,
        dt: Optional[float] = None,
        deadline: Optional[float] = None,
    ) -> QuantumStateED:
        """Propagate ``state`` under the piecewise-constant H(J_mid) of every step.

        Args:
            state: Initial state (not modified)
            trajectory: Control pulse on a uniform grid
            dt: Expected grid spacing; checked against the trajectory if given
            deadline: time.monotonic() value after which the evolution aborts

        Raises:
            DomainError: If dt <= 0 or does not match the trajectory grid
            EvaluationTimeoutError: If the deadline passes
        """
        _check_step(trajectory, dt)
        psi = state.amplitudes.copy()
        step = trajectory.dt
        for k, ratio in enumerate(trajectory.step_ratios()):
            if deadline is not None and time.monotonic() > deadline:
                raise EvaluationTimeoutError(
                    f"exact evolution stopped at step {k}/{trajectory.n_steps}"
                )
            psi = expm_krylov(
                self.hamiltonian.matvec(float(ratio)), psi, step, self.krylov_dim, self.krylov_tol
            )
        return QuantumStateED(state.basis, psi, state.params)

    def expectation_density(self, state: QuantumStateED) -> tuple[np.ndarray, np.ndarray]:
        """Per-site <n_i> and <n_i^2> - <n_i>^2."""
        return expectation_density(state)

    def occupation_distribution(self, state: QuantumStateED) -> np.ndarray:
        return occupation_distribution(state)

    def energy(self, state: QuantumStateED, ratio: float) -> float:
        """<psi|H(ratio)|psi> / <psi|psi>."""
        psi = state.amplitudes
        h_psi = self.hamiltonian.matvec(ratio)(psi)
        return float(np.vdot(psi, h_psi).real / np.vdot(psi, psi).real)


def _check_step(trajectory: ControlTrajectory, dt: Optional[float]) -> None:
    if dt is None:
        return
    if dt <= 0:
        raise DomainError(f"time step must be positive, got {dt}")
    if trajectory.n_steps and not math.isclose(trajectory.dt, dt, rel_tol=1e-9):
        raise DomainError(f"trajectory spacing {trajectory.dt} does not match dt={dt}")


@lru_cache(maxsize=16)
def _engine_for(basis: FockBasis, params: LatticeParams) -> ExactEngine:
    return ExactEngine(params, basis=basis)


def ground_state(
    basis: FockBasis, params: LatticeParams, ratio: float
) -> tuple[float, QuantumStateED]:
    """Lowest eigenpair of H(ratio) on ``basis``."""
    return _engine_for(basis, params).ground_state(ratio)


def evolve(state: QuantumStateED, pulse: ControlTrajectory, dt: float) -> QuantumStateED:
    """Propagate ``state`` under ``pulse`` sampled with spacing ``dt``."""
    if dt <= 0:
        raise DomainError(f"time step must be positive, got {dt}")
    return _engine_for(state.basis, state.params).evolve(state, pulse, dt=dt)


def expectation_density(state: QuantumStateED) -> tuple[np.ndarray, np.ndarray]:
    """Exact per-site <n_i> and fluctuations <n_i^2> - <n_i>^2 of a state."""
    probs = np.abs(state.amplitudes) ** 2
    probs = probs / probs.sum()
    occ = state.basis.occupations.astype(float)
    mean = probs @ occ
    second = probs @ (occ * occ)
    return mean, second - mean * mean


def occupation_distribution(state: QuantumStateED) -> np.ndarray:
    """(N, n_max + 1) array of the probability of finding n atoms on site i."""
    probs = np.abs(state.amplitudes) ** 2
    probs = probs / probs.sum()
    basis = state.basis
    dist = np.zeros((basis.n_sites, basis.local_dim))
    for site in range(basis.n_sites):
        dist[site] = np.bincount(
            basis.occupations[:, site], weights=probs, minlength=basis.local_dim
        )
    return dist
