"""Tests for the exact-diagonalization engine."""

import itertools
import time

import numpy as np
import pytest

from src.crab_mott.exact import (
    ExactEngine,
    ExactHamiltonian,
    QuantumStateED,
    build_basis,
    count_states,
    evolve,
    expectation_density,
    ground_state,
    occupation_distribution,
    sector_basis,
)
from src.crab_mott.exceptions import CapacityError, DomainError, EvaluationTimeoutError
from src.crab_mott.lattice import dense_hamiltonian
from src.crab_mott.models import ControlTrajectory, LatticeParams


@pytest.fixture
def params():
    """Three sites, three atoms, n_max = 2, weak trap."""
    return LatticeParams(n_sites=3, n_max=2, trap_curvature=0.3)


@pytest.fixture
def engine(params):
    """Exact engine for the three-site chain."""
    return ExactEngine(params)


def constant_trajectory(ratio, t_total, n_steps):
    """Uniform grid with a constant control value."""
    times = np.linspace(0.0, t_total, n_steps + 1)
    return ControlTrajectory(times, np.full(n_steps + 1, ratio), np.full(n_steps, ratio))


class TestFockBasis:
    """Tests for basis enumeration."""

    @pytest.mark.parametrize(
        "n_sites,n_atoms,n_max,expected",
        [(3, 3, 2, 7), (4, 4, 4, 35), (8, 8, 4, 5475), (4, 4, 1, 1)],
    )
    def test_count_states(self, n_sites, n_atoms, n_max, expected):
        """Test the sector dimension."""
        assert count_states(n_sites, n_atoms, n_max) == expected

    def test_lexicographic_order(self):
        """Test states are sorted and keys ascend."""
        basis = sector_basis(3, 3, 2)
        assert basis.size == 7
        assert basis.states[0] == (0, 1, 2)
        assert basis.states[-1] == (2, 1, 0)
        assert basis.states == sorted(basis.states)
        assert np.all(np.diff(basis.keys) > 0)

    def test_saturated_sector(self):
        """Test n_max = 1 at unit filling leaves the single Mott state."""
        basis = sector_basis(4, 4, 1)
        assert basis.states == [(1, 1, 1, 1)]

    def test_lookup(self):
        """Test key lookup, including missing keys."""
        basis = sector_basis(3, 3, 2)
        assert basis.index_of((1, 1, 1)) == basis.index[(1, 1, 1)]
        assert basis.lookup(np.array([0]))[0] == -1
        with pytest.raises(KeyError):
            basis.index_of((3, 0, 0))

    def test_capacity_error(self):
        """Test the state budget is enforced before enumeration."""
        with pytest.raises(CapacityError) as excinfo:
            build_basis(LatticeParams(n_sites=8, n_max=4), max_states=100)
        assert excinfo.value.required == 5475
        assert excinfo.value.limit == 100

    def test_empty_sector(self):
        """Test a sector that cannot hold the atoms."""
        with pytest.raises(DomainError):
            sector_basis(2, 5, 2)


class TestExactHamiltonian:
    """Tests for the sparse Hamiltonian."""

    def test_matches_dense_projection(self, params):
        """Test the sector matrix equals the dense H restricted to the sector."""
        basis = build_basis(params)
        sparse = ExactHamiltonian(basis, params).matrix(0.4).toarray()
        dense = dense_hamiltonian(params, 0.4)
        assert np.allclose(sparse, dense[np.ix_(basis.keys, basis.keys)])

    def test_matvec_matches_matrix(self, params):
        """Test the matvec closure agrees with the assembled matrix."""
        basis = build_basis(params)
        ham = ExactHamiltonian(basis, params)
        v = np.random.default_rng(1).standard_normal(basis.size)
        assert np.allclose(ham.matvec(0.2)(v), ham.matrix(0.2) @ v)

    def test_mismatched_basis(self, params):
        """Test a basis of another lattice is rejected."""
        with pytest.raises(DomainError):
            ExactHamiltonian(sector_basis(4, 4, 2), params)


class TestGroundState:
    """Tests for ground-state preparation."""

    def test_two_site_closed_form(self):
        """Test E0 = (1 - sqrt(1 + 16 J^2)) / 2 for two atoms on two sites."""
        params = LatticeParams(n_sites=2, n_max=2)
        energy, _ = ExactEngine(params).ground_state(0.5)
        assert energy == pytest.approx((1.0 - np.sqrt(5.0)) / 2.0, abs=1e-12)

    def test_matches_dense_spectrum(self, params, engine):
        """Test the ground energy is the lowest eigenvalue of the sector."""
        basis = engine.basis
        dense = dense_hamiltonian(params, 0.3)[np.ix_(basis.keys, basis.keys)]
        energy, state = engine.ground_state(0.3)
        assert energy == pytest.approx(np.linalg.eigvalsh(dense)[0], abs=1e-10)
        assert state.norm == pytest.approx(1.0)

    def test_atomic_limit_is_mott_state(self):
        """Test J/U = 0 at unit filling gives one atom per site."""
        params = LatticeParams(n_sites=4, n_max=3)
        energy, state = ExactEngine(params).ground_state(0.0)
        occupations, fluctuations = expectation_density(state)
        assert energy == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(occupations, 1.0)
        assert np.allclose(fluctuations, 0.0, atol=1e-12)

    def test_negative_ratio(self, engine):
        """Test J/U < 0 is rejected."""
        with pytest.raises(DomainError):
            engine.ground_state(-0.1)

    def test_module_level_helpers(self, params):
        """Test ground_state(basis, params, ratio) uses a cached engine."""
        basis = build_basis(params)
        e1, _ = ground_state(basis, params, 0.3)
        e2, _ = ground_state(basis, params, 0.3)
        assert e1 == e2


class TestEvolution:
    """Tests for time evolution."""

    def test_eigenstate_only_acquires_phase(self, engine):
        """Test an eigenstate under its own constant H keeps |overlap| = 1."""
        _, state = engine.ground_state(0.3)
        final = engine.evolve(state, constant_trajectory(0.3, 2.0, 40))
        assert abs(state.overlap(final)) == pytest.approx(1.0, abs=1e-10)

    def test_norm_and_energy_conserved(self, engine, params):
        """Test constant control conserves norm and energy."""
        start = QuantumStateED.from_occupation(engine.basis, params, (1, 1, 1))
        final = engine.evolve(start, constant_trajectory(0.4, 5.0, 200))
        assert final.norm == pytest.approx(1.0, abs=1e-10)
        assert engine.energy(final, 0.4) == pytest.approx(engine.energy(start, 0.4), abs=1e-9)

    def test_zero_duration(self, engine):
        """Test a single-point trajectory returns the initial state."""
        _, state = engine.ground_state(0.3)
        trajectory = ControlTrajectory(np.array([0.0]), np.array([0.3]))
        final = engine.evolve(state, trajectory)
        assert np.allclose(final.amplitudes, state.amplitudes)

    def test_time_reversal(self, engine):
        """Test evolving the conjugated final state under the reversed pulse recovers the start."""
        _, state = engine.ground_state(0.5)
        times = np.linspace(0.0, 3.0, 61)
        values = 0.5 * np.exp(-times)
        trajectory = ControlTrajectory(times, values)
        final = engine.evolve(state, trajectory)
        back = engine.evolve(final.conjugate(), trajectory.reversed())
        assert np.allclose(back.conjugate().amplitudes, state.amplitudes, atol=1e-8)

    def test_dt_mismatch(self, engine):
        """Test a dt that does not match the grid is rejected."""
        _, state = engine.ground_state(0.3)
        with pytest.raises(DomainError):
            engine.evolve(state, constant_trajectory(0.3, 1.0, 10), dt=0.05)
        with pytest.raises(DomainError):
            evolve(state, constant_trajectory(0.3, 1.0, 10), dt=0.0)

    def test_deadline(self, engine):
        """Test an expired deadline aborts the evolution."""
        _, state = engine.ground_state(0.3)
        with pytest.raises(EvaluationTimeoutError):
            engine.evolve(state, constant_trajectory(0.3, 1.0, 10), deadline=time.monotonic() - 1.0)

    def test_expectation_of_fock_state(self, engine, params):
        """Test a Fock state has exact occupations and no fluctuations."""
        state = QuantumStateED.from_occupation(engine.basis, params, (0, 1, 2))
        occupations, fluctuations = engine.expectation_density(state)
        assert np.allclose(occupations, [0.0, 1.0, 2.0])
        assert np.allclose(fluctuations, 0.0)

    def test_occupation_distribution_of_fock_state(self, engine, params):
        """Test a Fock state puts all weight on its own occupations."""
        state = QuantumStateED.from_occupation(engine.basis, params, (0, 1, 2))
        dist = occupation_distribution(state)
        assert dist.shape == (3, 3)
        assert np.array_equal(dist, np.eye(3))

    def test_distribution_moments(self, engine):
        """Test the distribution reproduces <n_i> and the fluctuations."""
        _, state = engine.ground_state(0.3)
        dist = engine.occupation_distribution(state)
        n = np.arange(dist.shape[1])
        occupations, fluctuations = expectation_density(state)
        assert np.allclose(dist.sum(axis=1), 1.0)
        assert np.allclose(dist @ n, occupations, atol=1e-12)
        assert np.allclose(dist @ n**2 - occupations**2, fluctuations, atol=1e-12)


def reflection_permutation(basis):
    """Index of the mirrored state j -> N + 1 - j for every basis state."""
    return np.array([basis.index_of(tuple(reversed(state))) for state in basis.states])


class TestHomogeneousLimit:
    """Reflection symmetry of the untrapped chain."""

    @pytest.mark.parametrize("n_sites", [4, 6, 8])
    def test_reflection_commutes(self, n_sites):
        """Test Omega = 0 leaves H invariant under j -> N + 1 - j."""
        params = LatticeParams(n_sites=n_sites, n_max=2)
        engine = ExactEngine(params)
        perm = reflection_permutation(engine.basis)
        matrix = engine.hamiltonian.matrix(0.3).toarray()
        assert np.allclose(matrix[np.ix_(perm, perm)], matrix, atol=1e-12)
        _, state = engine.ground_state(0.3)
        occupations, _ = expectation_density(state)
        assert np.allclose(occupations, occupations[::-1], atol=1e-10)

    def test_reflected_spectrum(self):
        """Test the spectrum of the mirrored Hamiltonian agrees to 1e-10."""
        params = LatticeParams(n_sites=6, n_max=3)
        engine = ExactEngine(params)
        perm = reflection_permutation(engine.basis)
        matrix = engine.hamiltonian.matrix(0.52).toarray()
        mirrored = np.linalg.eigvalsh(matrix[np.ix_(perm, perm)])
        assert np.allclose(np.linalg.eigvalsh(matrix), mirrored, atol=1e-10)

    def test_trap_breaks_reflection(self):
        """Test a trap centred at N/2 is not mirror symmetric."""
        params = LatticeParams(n_sites=4, n_max=2, trap_curvature=0.5)
        engine = ExactEngine(params)
        perm = reflection_permutation(engine.basis)
        matrix = engine.hamiltonian.matrix(0.3).toarray()
        assert not np.allclose(matrix[np.ix_(perm, perm)], matrix)


def independent_hamiltonian(n_sites, n_max, ratio):
    """Dense unit-filling Hamiltonian built directly from the occupation tuples."""
    states = [s for s in itertools.product(range(n_max + 1), repeat=n_sites) if sum(s) == n_sites]
    index = {s: i for i, s in enumerate(states)}
    matrix = np.zeros((len(states), len(states)))
    for i, state in enumerate(states):
        matrix[i, i] = 0.5 * sum(n * (n - 1) for n in state)
        for j in range(n_sites - 1):
            for src, dst in ((j + 1, j), (j, j + 1)):
                if state[src] == 0 or state[dst] == n_max:
                    continue
                target = list(state)
                target[src] -= 1
                target[dst] += 1
                amplitude = np.sqrt(state[src] * (state[dst] + 1))
                matrix[index[tuple(target)], i] -= ratio * amplitude
    return matrix


class TestSixSiteGroundEnergy:
    """N = 6, unit filling, J/U = 0.52 against an independent construction."""

    def test_ground_energy(self):
        """Test the engine's ground energy matches a direct dense diagonalization."""
        expected = np.linalg.eigvalsh(independent_hamiltonian(6, 4, 0.52))[0]
        energy, state = ExactEngine(LatticeParams(n_sites=6, n_max=4)).ground_state(0.52)
        assert energy == pytest.approx(expected, abs=1e-10)
        assert -6 * 2 * 0.52 < energy < 0.0
