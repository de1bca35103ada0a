"""Tests for the Krylov eigen-solver and propagator."""

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence

from src.crab_mott.exceptions import ConvergenceError
from src.crab_mott.krylov import (
    DENSE_LIMIT,
    expm_krylov,
    fix_phase,
    lowest_eigenpair,
    residual_norm,
)


@pytest.fixture
def hermitian():
    """Random 40 x 40 complex Hermitian matrix."""
    rng = np.random.default_rng(7)
    a = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
    return 0.5 * (a + a.conj().T)


@pytest.fixture
def sparse_symmetric():
    """Sparse symmetric matrix above the dense limit."""
    n = DENSE_LIMIT + 144
    rng = np.random.default_rng(3)
    m = sp.random(n, n, density=0.02, random_state=rng)
    return (m + m.T + sp.diags(rng.standard_normal(n))).tocsr()


class TestLowestEigenpair:
    """Tests for lowest_eigenpair."""

    def test_dense_path(self, hermitian):
        """Test small problems match eigh."""
        value, vector = lowest_eigenpair(hermitian)
        assert value == pytest.approx(la.eigvalsh(hermitian)[0], abs=1e-10)
        assert residual_norm(hermitian, value, vector) < 1e-9

    def test_lanczos_path(self, sparse_symmetric):
        """Test ARPACK agrees with dense diagonalization."""
        value, vector = lowest_eigenpair(sparse_symmetric)
        expected = la.eigvalsh(sparse_symmetric.toarray())[0]
        assert value == pytest.approx(expected, abs=1e-9)
        assert np.linalg.norm(vector) == pytest.approx(1.0)

    def test_retries_then_raises(self, sparse_symmetric, mocker):
        """Test non-convergence is retried and then reported as ConvergenceError."""
        n = sparse_symmetric.shape[0]
        failure = ArpackNoConvergence("no convergence", np.array([]), np.zeros((n, 0)))
        mocked = mocker.patch("src.crab_mott.krylov.eigsh", side_effect=failure)
        with pytest.raises(ConvergenceError):
            lowest_eigenpair(sparse_symmetric, max_attempts=3)
        assert mocked.call_count == 3
        ncvs = [call.kwargs["ncv"] for call in mocked.call_args_list]
        assert ncvs == [20, 40, 80]

    def test_fix_phase(self):
        """Test the largest entry becomes real and positive."""
        vector = fix_phase(np.array([0.1j, -0.9j, 0.2]))
        assert vector[1].real > 0
        assert abs(vector[1].imag) < 1e-15


class TestExpmKrylov:
    """Tests for expm_krylov."""

    @pytest.mark.parametrize("tau", [0.05, 0.3, 2.0])
    def test_matches_expm(self, hermitian, tau):
        """Test exp(-i tau H) psi against scipy's dense expm."""
        psi = np.random.default_rng(1).standard_normal(40).astype(complex)
        psi /= np.linalg.norm(psi)
        expected = la.expm(-1j * tau * hermitian) @ psi
        result = expm_krylov(lambda v: hermitian @ v, psi, tau, krylov_dim=20, tol=1e-12)
        assert np.allclose(result, expected, atol=1e-9)

    def test_zero_time(self, hermitian):
        """Test tau = 0 returns a copy."""
        psi = np.ones(40, dtype=complex)
        result = expm_krylov(lambda v: hermitian @ v, psi, 0.0)
        assert np.array_equal(result, psi)
        assert result is not psi

    def test_preserves_norm(self, hermitian):
        """Test the propagator is unitary to the requested tolerance."""
        psi = np.zeros(40, dtype=complex)
        psi[0] = 1.0
        result = expm_krylov(lambda v: hermitian @ v, psi, 1.0)
        assert np.linalg.norm(result) == pytest.approx(1.0, abs=1e-10)

    def test_invariant_subspace(self):
        """Test an eigenvector triggers the breakdown branch."""
        h = np.diag([1.0, 2.0, 3.0])
        psi = np.array([0.0, 1.0, 0.0], dtype=complex)
        result = expm_krylov(lambda v: h @ v, psi, 0.7)
        assert np.allclose(result, np.exp(-1j * 1.4) * psi)
