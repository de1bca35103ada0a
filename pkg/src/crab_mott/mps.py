"""Matrix-product-state engine: two-site DMRG ground states and TEBD time evolution.

Site tensors have index order (left bond, physical, right bond). Every bond
carries integer charge labels, the number of atoms to the left of the bond, so
that each tensor is block sparse: A[l, s, r] != 0 only if q_left[l] + s == q_right[r].
All factorizations are done blockwise, which keeps the total atom number exact
through ground-state search, truncation and time evolution.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import LinearOperator

from .exceptions import (
    ConvergenceError,
    DomainError,
    EvaluationTimeoutError,
    TruncationOverflowError,
)
from .krylov import lowest_eigenpair
from .lattice import annihilation, bond_hamiltonian, site_operator
from .models import ControlTrajectory, LatticeParams

logger = logging.getLogger(__name__)

# Singular values below this fraction of the largest one are always dropped.
_ZERO_SV = 1e-15


@dataclass
class MpsState:
    """
    Particle-number conserving MPS of an open chain.

    Attributes:
        tensors: Site tensors of shape (D_left, n_max + 1, D_right)
        charges: Atom number left of each bond, one int array per bond (N + 1 bonds)
        params: Lattice the state lives on
        center: Orthogonality center, or None if the gauge is unknown
        truncation_log: Discarded weight of every TEBD step applied so far
    """

    tensors: list
    charges: list
    params: LatticeParams
    center: Optional[int] = 0
    truncation_log: list = field(default_factory=list)

    def __post_init__(self) -> None:
        n = self.params.n_sites
        if len(self.tensors) != n or len(self.charges) != n + 1:
            raise DomainError("MPS needs one tensor per site and one charge array per bond")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DomainError("boundary bonds of an MPS must have dimension 1")
        for j, tensor in enumerate(self.tensors):
            if tensor.shape[1] != self.params.local_dim:
                raise DomainError(f"site {j} has physical dimension {tensor.shape[1]}")

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        """Dimensions of the N - 1 internal bonds."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    @property
    def discarded_weight(self) -> float:
        return float(sum(self.truncation_log))

    def copy(self) -> "MpsState":
        return MpsState(
            tensors=[t.copy() for t in self.tensors],
            charges=[q.copy() for q in self.charges],
            params=self.params,
            center=self.center,
            truncation_log=list(self.truncation_log),
        )


def product_state(params: LatticeParams, occupations=None, dtype=complex) -> MpsState:
    """Fock product state; by default atoms are spread as evenly as possible."""
    n, k = params.n_sites, params.n_atoms
    if occupations is None:
        occupations = [(j + 1) * k // n - j * k // n for j in range(n)]
    occupations = [int(v) for v in occupations]
    if len(occupations) != n or sum(occupations) != k:
        raise DomainError(f"occupations {occupations} do not place {k} atoms on {n} sites")
    if any(not 0 <= v <= params.n_max for v in occupations):
        raise DomainError(f"occupations {occupations} exceed n_max={params.n_max}")
    tensors = []
    for v in occupations:
        tensor = np.zeros((1, params.local_dim, 1), dtype=dtype)
        tensor[0, v, 0] = 1.0
        tensors.append(tensor)
    charges = [np.array([c], dtype=np.int64) for c in np.concatenate([[0], np.cumsum(occupations)])]
    return MpsState(tensors=tensors, charges=charges, params=params, center=0)


def _truncation_rank(values: np.ndarray, total: float, chi_max: int, cutoff: float) -> int:
    weights = values**2 / total
    tails = np.append(np.cumsum(weights[::-1])[::-1], 0.0)
    rank = int(np.argmax(tails[1:] <= cutoff)) + 1
    rank = min(rank, chi_max, int(np.count_nonzero(values > _ZERO_SV * values[0])))
    return max(rank, 1)


def _svd_blocks(
    matrix: np.ndarray,
    row_q: np.ndarray,
    col_q: np.ndarray,
    chi_max: int = 2**31,
    cutoff: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, float]:
    """Truncated SVD of a charge-block-diagonal matrix.

    Keeps at most ``chi_max`` singular values and the fewest whose discarded
    relative weight stays below ``cutoff``.

    Returns:
        (U, S, Vh, charges of the kept values, discarded relative weight)
    """
    blocks = []
    for q in np.intersect1d(row_q, col_q):
        rows = np.flatnonzero(row_q == q)
        cols = np.flatnonzero(col_q == q)
        sub = matrix[np.ix_(rows, cols)]
        try:
            u, s, vh = la.svd(sub, full_matrices=False)
        except la.LinAlgError:
            u, s, vh = la.svd(sub, full_matrices=False, lapack_driver="gesvd")
        blocks.append((int(q), rows, cols, u, s, vh))
    if not blocks:
        raise DomainError("tensor has no weight in any particle-number sector")

    values = np.concatenate([b[4] for b in blocks])
    owner = np.concatenate([np.full(len(b[4]), i) for i, b in enumerate(blocks)])
    local = np.concatenate([np.arange(len(b[4])) for b in blocks])
    order = np.argsort(-values, kind="stable")
    values, owner, local = values[order], owner[order], local[order]
    total = float(np.sum(values**2))
    if total == 0.0:
        raise DomainError("cannot factorize a zero tensor")

    rank = _truncation_rank(values, total, chi_max, cutoff)
    discarded = float(np.sum(values[rank:] ** 2) / total)
    u_out = np.zeros((matrix.shape[0], rank), dtype=matrix.dtype)
    v_out = np.zeros((rank, matrix.shape[1]), dtype=matrix.dtype)
    charges = np.empty(rank, dtype=np.int64)
    for n in range(rank):
        q, rows, cols, u, _, vh = blocks[owner[n]]
        u_out[rows, n] = u[:, local[n]]
        v_out[n, cols] = vh[local[n], :]
        charges[n] = q
    return u_out, values[:rank], v_out, charges, discarded


def _site_row_charges(q_left: np.ndarray, d: int) -> np.ndarray:
    return (q_left[:, None] + np.arange(d)[None, :]).ravel()


def _site_col_charges(q_right: np.ndarray, d: int) -> np.ndarray:
    return (q_right[None, :] - np.arange(d)[:, None]).ravel()


def _shift_right(state: MpsState, site: int) -> None:
    tensor = state.tensors[site]
    dl, d, dr = tensor.shape
    row_q = _site_row_charges(state.charges[site], d)
    u, s, vh, q, _ = _svd_blocks(tensor.reshape(dl * d, dr), row_q, state.charges[site + 1])
    state.tensors[site] = u.reshape(dl, d, len(s))
    state.tensors[site + 1] = np.einsum("kr,rsx->ksx", s[:, None] * vh, state.tensors[site + 1])
    state.charges[site + 1] = q


def _shift_left(state: MpsState, site: int) -> None:
    tensor = state.tensors[site]
    dl, d, dr = tensor.shape
    col_q = _site_col_charges(state.charges[site + 1], d)
    u, s, vh, q, _ = _svd_blocks(tensor.reshape(dl, d * dr), state.charges[site], col_q)
    state.tensors[site] = vh.reshape(len(s), d, dr)
    state.tensors[site - 1] = np.einsum("xsl,lk->xsk", state.tensors[site - 1], u * s[None, :])
    state.charges[site] = q


def move_center(state: MpsState, target: int) -> MpsState:
    """Move the orthogonality center to ``target`` in place (gauge fixing if needed)."""
    if not 0 <= target < state.n_sites:
        raise DomainError(f"center {target} outside the chain")
    if state.center is None:
        for site in range(state.n_sites - 1):
            _shift_right(state, site)
        state.center = state.n_sites - 1
    while state.center < target:
        _shift_right(state, state.center)
        state.center += 1
    while state.center > target:
        _shift_left(state, state.center)
        state.center -= 1
    return state


def normalize(state: MpsState) -> MpsState:
    """Scale the center tensor to unit norm in place."""
    if state.center is None:
        move_center(state, 0)
    tensor = state.tensors[state.center]
    state.tensors[state.center] = tensor / np.linalg.norm(tensor)
    return state


def isometry_residuals(state: MpsState) -> list[float]:
    """Deviation of every non-center tensor from its isometry condition."""
    if state.center is None:
        raise DomainError("state has no orthogonality center")
    residuals = []
    for j, tensor in enumerate(state.tensors):
        if j == state.center:
            continue
        if j < state.center:
            gram = np.einsum("asb,asc->bc", tensor.conj(), tensor)
        else:
            gram = np.einsum("asb,csb->ac", tensor.conj(), tensor)
        residuals.append(float(np.linalg.norm(gram - np.eye(gram.shape[0]))))
    return residuals


def overlap(bra: MpsState, ket: MpsState) -> complex:
    """<bra|ket> for two states on the same lattice."""
    env = np.ones((1, 1))
    for a, b in zip(bra.tensors, ket.tensors):
        env = np.einsum("xy,xsX,ysY->XY", env, a.conj(), b)
    return complex(env[0, 0])


def norm(state: MpsState) -> float:
    return math.sqrt(abs(overlap(state, state)))


def to_dense(state: MpsState) -> np.ndarray:
    """Full d^N state vector, site 1 as the most significant index (small N only)."""
    psi = state.tensors[0].reshape(state.params.local_dim, -1)
    for tensor in state.tensors[1:]:
        psi = np.einsum("pa,asb->psb", psi, tensor).reshape(-1, tensor.shape[2])
    return psi.reshape(-1)


def build_mpo(params: LatticeParams, ratio: float) -> list[np.ndarray]:
    """Bose-Hubbard MPO with bond dimension 4; W[w, v, out, in]."""
    d = params.local_dim
    b = annihilation(params.n_max)
    hop = ratio * params.interaction
    eye = np.eye(d)
    mpo = []
    for j in range(params.n_sites):
        w = np.zeros((4, 4, d, d))
        w[0, 0] = eye
        w[0, 1] = -hop * b.T
        w[0, 2] = -hop * b
        w[0, 3] = site_operator(params, j)
        w[1, 3] = b
        w[2, 3] = b.T
        w[3, 3] = eye
        if j == 0:
            w = w[0:1]
        if j == params.n_sites - 1:
            w = w[:, 3:4]
        mpo.append(w)
    return mpo


def _extend_left(env: np.ndarray, tensor: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("xwy,xaX,wvab,ybY->XvY", env, tensor.conj(), w, tensor, optimize=True)


def _extend_right(env: np.ndarray, tensor: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("XvY,xaX,wvab,ybY->xwy", env, tensor.conj(), w, tensor, optimize=True)


def mpo_expectation(state: MpsState, mpo: list[np.ndarray]) -> float:
    """<psi|W|psi> / <psi|psi>."""
    env = np.ones((1, 1, 1))
    for tensor, w in zip(state.tensors, mpo):
        env = _extend_left(env, tensor, w)
    return float(env[0, 0, 0].real) / norm(state) ** 2


def _two_site_charges(state: MpsState, site: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = state.params.local_dim
    q_left, q_right = state.charges[site], state.charges[site + 2]
    occ = np.arange(d)
    mask = (
        q_left[:, None, None, None] + occ[None, :, None, None] + occ[None, None, :, None]
        == q_right[None, None, None, :]
    )
    return np.flatnonzero(mask), _site_row_charges(q_left, d), _site_col_charges(q_right, d)


def _optimize_bond(
    state: MpsState, site: int, left: np.ndarray, right: np.ndarray, mpo: list[np.ndarray]
) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of the two-site effective Hamiltonian inside the allowed charge sector."""
    a, b = state.tensors[site], state.tensors[site + 1]
    theta = np.einsum("asb,btc->astc", a, b)
    shape = theta.shape
    allowed, _, _ = _two_site_charges(state, site)
    w1, w2 = mpo[site], mpo[site + 1]
    path = np.einsum_path(
        "xwy,wuac,uvbd,XvY,ycdY->xabX", left, w1, w2, right, theta, optimize="optimal"
    )[0]

    def matvec(x: np.ndarray) -> np.ndarray:
        full = np.zeros(shape, dtype=float)
        full.flat[allowed] = np.ravel(x)
        out = np.einsum("xwy,wuac,uvbd,XvY,ycdY->xabX", left, w1, w2, right, full, optimize=path)
        return out.ravel()[allowed]

    size = len(allowed)
    operator = LinearOperator((size, size), matvec=matvec, dtype=float)
    v0 = theta.real.ravel()[allowed]
    if not np.any(v0):
        v0 = np.ones(size)
    energy, vector = lowest_eigenpair(operator, v0=v0)
    result = np.zeros(shape, dtype=float)
    result.flat[allowed] = vector.real
    return energy, result


def _split_theta(
    state: MpsState, site: int, theta: np.ndarray, chi_max: int, cutoff: float, move_right: bool
) -> float:
    """Split a two-site tensor into ``site`` and ``site + 1``; returns the discarded weight."""
    dl, d, _, dr = theta.shape
    _, row_q, col_q = _two_site_charges(state, site)
    u, s, vh, q, discarded = _svd_blocks(
        theta.reshape(dl * d, d * dr), row_q, col_q, chi_max, cutoff
    )
    s = s / np.linalg.norm(s)
    k = len(s)
    if move_right:
        state.tensors[site] = u.reshape(dl, d, k)
        state.tensors[site + 1] = (s[:, None] * vh).reshape(k, d, dr)
        state.center = site + 1
    else:
        state.tensors[site] = (u * s[None, :]).reshape(dl, d, k)
        state.tensors[site + 1] = vh.reshape(k, d, dr)
        state.center = site
    state.charges[site + 1] = q
    return discarded


def ground_state_mps(
    params: LatticeParams,
    ratio: float,
    m_max: int,
    energy_tol: float = 1e-10,
    max_sweeps: int = 30,
    cutoff: float = 1e-12,
) -> tuple[float, MpsState]:
    """Two-site DMRG ground state of H(ratio) with bond dimension at most ``m_max``.

    The returned energy is <H> of the returned (truncated) state, hence an
    upper bound on the true ground energy.

    Raises:
        DomainError: If ratio < 0 or m_max < 1
        ConvergenceError: If the sweep energy has not settled after ``max_sweeps``
    """
    if ratio < 0:
        raise DomainError(f"J/U must be nonnegative, got {ratio}")
    if m_max < 1:
        raise DomainError(f"bond dimension must be >= 1, got {m_max}")
    n = params.n_sites
    state = product_state(params, dtype=float)
    mpo = build_mpo(params, ratio)

    right: list = [None] * (n + 1)
    right[n] = np.ones((1, 1, 1))
    for j in range(n - 1, 1, -1):
        right[j] = _extend_right(right[j + 1], state.tensors[j], mpo[j])
    left: list = [None] * (n + 1)
    left[0] = np.ones((1, 1, 1))

    energies: list[float] = []
    for sweep in range(max_sweeps):
        for j in range(n - 1):
            energy, theta = _optimize_bond(state, j, left[j], right[j + 2], mpo)
            _split_theta(state, j, theta, m_max, cutoff, move_right=True)
            left[j + 1] = _extend_left(left[j], state.tensors[j], mpo[j])
        for j in range(n - 2, -1, -1):
            energy, theta = _optimize_bond(state, j, left[j], right[j + 2], mpo)
            _split_theta(state, j, theta, m_max, cutoff, move_right=False)
            right[j + 1] = _extend_right(right[j + 2], state.tensors[j + 1], mpo[j + 1])
        energies.append(energy)
        logger.debug(
            "DMRG sweep %d at J/U=%.6g: E=%.12f, max bond %d",
            sweep + 1, ratio, energy, state.max_bond,
        )
        if len(energies) >= 2 and abs(energies[-1] - energies[-2]) <= energy_tol:
            break
    else:
        raise ConvergenceError(
            f"DMRG did not converge within {max_sweeps} sweeps", energies=energies[-2:]
        )

    state.tensors = [t.astype(complex) for t in state.tensors]
    normalize(state)
    final = mpo_expectation(state, mpo)
    logger.info(
        "MPS ground state at J/U=%.6g (m=%d): E=%.12f after %d sweeps",
        ratio, m_max, final, len(energies),
    )
    return final, state


@dataclass(frozen=True)
class TrotterPlan:
    """
    Second-order TEBD schedule.

    Attributes:
        dt: Time step in hbar/U
        m_max: Bond dimension cap
        svd_cutoff: Discarded relative weight allowed per gate
        abort_threshold: Cumulative discarded weight that aborts the evolution
        order: Trotter order (only 2 is implemented)
    """

    dt: float
    m_max: int
    svd_cutoff: float = 1e-10
    abort_threshold: float = 1e-3
    order: int = 2

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise DomainError(f"time step must be positive, got {self.dt}")
        if self.m_max < 1:
            raise DomainError(f"m_max must be >= 1, got {self.m_max}")
        if self.svd_cutoff < 0:
            raise DomainError("svd_cutoff cannot be negative")
        if self.order != 2:
            raise DomainError(f"only second-order Trotter splitting is available, got {self.order}")

    @property
    def gate_schedule(self) -> tuple:
        """(bond parity, fraction of dt) layers of one step: even half, odd full, even half."""
        return ((0, 0.5), (1, 1.0), (0, 0.5))


def _bond_gates(params: LatticeParams, ratio: float, dt: float) -> dict:
    """exp(-i h_b tau) per bond and schedule fraction, keyed by (bond, fraction)."""
    d = params.local_dim
    gates = {}
    for bond in range(params.n_sites - 1):
        values, vectors = la.eigh(bond_hamiltonian(params, ratio, bond))
        fractions = (0.5,) if bond % 2 == 0 else (1.0,)
        for fraction in fractions:
            phases = np.exp(-1j * fraction * dt * values)
            gate = (vectors * phases[None, :]) @ vectors.T
            gates[(bond, fraction)] = gate.reshape(d, d, d, d)
    return gates


def _apply_gate(
    state: MpsState, bond: int, gate: np.ndarray, plan: TrotterPlan, move_right: bool
) -> float:
    move_center(state, bond if move_right else bond + 1)
    theta = np.einsum("asb,btc->astc", state.tensors[bond], state.tensors[bond + 1])
    theta = np.einsum("stuv,auvc->astc", gate, theta)
    return _split_theta(state, bond, theta, plan.m_max, plan.svd_cutoff, move_right)


def tebd_evolve(
    state: MpsState,
    trajectory: ControlTrajectory,
    plan: TrotterPlan,
    deadline: Optional[float] = None,
) -> MpsState:
    """Evolve ``state`` under the control trajectory with second-order TEBD.

    Every step uses the midpoint J/U of the trajectory. The input state is not
    modified.

    Raises:
        DomainError: If the trajectory grid does not match plan.dt
        TruncationOverflowError: If the cumulative discarded weight exceeds the abort threshold
        EvaluationTimeoutError: If the deadline passes
    """
    if trajectory.n_steps and not math.isclose(trajectory.dt, plan.dt, rel_tol=1e-9):
        raise DomainError(f"trajectory spacing {trajectory.dt} does not match plan dt={plan.dt}")
    out = state.copy()
    out.tensors = [t.astype(complex) for t in out.tensors]
    if out.center is None:
        move_center(out, 0)
    params = out.params
    bonds = {parity: list(range(parity, params.n_sites - 1, 2)) for parity in (0, 1)}

    for step, ratio in enumerate(trajectory.step_ratios()):
        if deadline is not None and time.monotonic() > deadline:
            raise EvaluationTimeoutError(f"TEBD stopped at step {step}/{trajectory.n_steps}")
        gates = _bond_gates(params, float(ratio), plan.dt)
        discarded = 0.0
        for layer, (parity, fraction) in enumerate(plan.gate_schedule):
            move_right = layer % 2 == 0
            order = bonds[parity] if move_right else bonds[parity][::-1]
            for bond in order:
                discarded += _apply_gate(out, bond, gates[(bond, fraction)], plan, move_right)
        out.truncation_log.append(discarded)
        cumulative = out.discarded_weight
        if cumulative > plan.abort_threshold:
            raise TruncationOverflowError(cumulative, plan.abort_threshold)
    normalize(out)
    if trajectory.n_steps:
        logger.debug(
            "TEBD finished %d steps: max bond %d, discarded weight %.3e",
            trajectory.n_steps, out.max_bond, out.discarded_weight,
        )
    return out


def mps_occupation_distribution(state: MpsState) -> np.ndarray:
    """(N, n_max + 1) array of the probability of finding n atoms on site i."""
    n = state.n_sites
    left = [np.ones((1, 1))]
    for tensor in state.tensors:
        left.append(np.einsum("xy,xsX,ysY->XY", left[-1], tensor.conj(), tensor))
    right = [np.ones((1, 1))]
    for tensor in reversed(state.tensors):
        right.append(np.einsum("XY,xsX,ysY->xy", right[-1], tensor.conj(), tensor))
    right = right[::-1]
    total = float(left[-1][0, 0].real)

    probs = np.empty((n, state.params.local_dim))
    for j, tensor in enumerate(state.tensors):
        weights = np.einsum("xy,xsX,ysY,XY->s", left[j], tensor.conj(), tensor, right[j + 1])
        probs[j] = weights.real / total
    return np.clip(probs, 0.0, None)


def mps_expectations(
    state: MpsState, ratio: Optional[float] = None
) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-site <n_i>, <n_i^2> - <n_i>^2 and, if ``ratio`` is given, <H(ratio)>."""
    occ = np.arange(state.params.local_dim, dtype=float)
    probs = mps_occupation_distribution(state)
    mean = probs @ occ
    fluct = np.maximum(probs @ (occ * occ) - mean * mean, 0.0)
    energy = math.nan if ratio is None else mpo_expectation(state, build_mpo(state.params, ratio))
    return mean, fluct, energy


def compress(state: MpsState, m_new: int) -> tuple[MpsState, float]:
    """SVD-truncate every bond to at most ``m_new``; returns (state, |<input|output>|)."""
    if m_new < 1:
        raise DomainError(f"bond dimension must be >= 1, got {m_new}")
    out = state.copy()
    if out.max_bond <= m_new:
        return out, 1.0
    move_center(out, out.n_sites - 1)
    normalize(out)
    d = out.params.local_dim
    for site in range(out.n_sites - 1, 0, -1):
        tensor = out.tensors[site]
        dl, _, dr = tensor.shape
        col_q = _site_col_charges(out.charges[site + 1], d)
        u, s, vh, q, _ = _svd_blocks(
            tensor.reshape(dl, d * dr), out.charges[site], col_q, chi_max=m_new
        )
        out.tensors[site] = vh.reshape(len(s), d, dr)
        out.tensors[site - 1] = np.einsum("xsl,lk->xsk", out.tensors[site - 1], u * s[None, :])
        out.charges[site] = q
        out.center = site - 1
    normalize(out)
    fidelity = abs(overlap(state, out)) / norm(state)
    logger.debug("Compressed MPS to m=%d with fidelity %.12f", m_new, fidelity)
    return out, float(fidelity)


class MpsEngine:
    """
    MPS backend for one lattice: DMRG ground states and TEBD evolution.

    Example:
        >>> engine = MpsEngine(LatticeParams(n_sites=20), m_max=64, dt=1e-2)
        >>> energy, state = engine.ground_state(0.52)
    """

    def __init__(
        self,
        params: LatticeParams,
        m_max: int = 64,
        dt: float = 1e-2,
        svd_cutoff: float = 1e-10,
        abort_threshold: float = 1e-3,
        energy_tol: float = 1e-10,
        max_sweeps: int = 30,
    ):
        self.params = params
        self.plan = TrotterPlan(
            dt=dt, m_max=m_max, svd_cutoff=svd_cutoff, abort_threshold=abort_threshold
        )
        self.energy_tol = energy_tol
        self.max_sweeps = max_sweeps

    @property
    def m_max(self) -> int:
        return self.plan.m_max

    def ground_state(self, ratio: float, m_max: Optional[int] = None) -> tuple[float, MpsState]:
        return ground_state_mps(
            self.params,
            ratio,
            m_max or self.plan.m_max,
            energy_tol=self.energy_tol,
            max_sweeps=self.max_sweeps,
        )

    def evolve(
        self, state: MpsState, trajectory: ControlTrajectory, deadline: Optional[float] = None
    ) -> MpsState:
        """TEBD on the trajectory's own grid (its spacing may be below the nominal dt)."""
        plan = self.plan
        if trajectory.n_steps and not math.isclose(trajectory.dt, plan.dt, rel_tol=1e-9):
            plan = replace(plan, dt=trajectory.dt)
        return tebd_evolve(state, trajectory, plan, deadline=deadline)

    def expectation_density(self, state: MpsState) -> tuple[np.ndarray, np.ndarray]:
        mean, fluct, _ = mps_expectations(state)
        return mean, fluct

    def occupation_distribution(self, state: MpsState) -> np.ndarray:
        return mps_occupation_distribution(state)

    def energy(self, state: MpsState, ratio: float) -> float:
        return mpo_expectation(state, build_mpo(self.params, ratio))
