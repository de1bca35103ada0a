"""Krylov-subspace linear algebra shared by the exact and MPS engines.

- ``lowest_eigenpair``: ground state of a Hermitian operator (dense for small
  problems, ARPACK Lanczos otherwise, retried with a larger Krylov space).
- ``expm_krylov``: exp(-i tau H) psi by a Lanczos projection with full
  re-orthogonalization and adaptive sub-stepping.
"""

import logging
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg as la
from scipy.sparse import spmatrix
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, aslinearoperator, eigsh
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from .exceptions import ConvergenceError

logger = logging.getLogger(__name__)

Operator = Union[np.ndarray, spmatrix, LinearOperator]
MatVec = Callable[[np.ndarray], np.ndarray]

# Problems up to this size are diagonalized densely.
DENSE_LIMIT = 256


def fix_phase(vector: np.ndarray) -> np.ndarray:
    """Rotate a vector so that its largest-magnitude entry is real and positive."""
    pivot = vector[np.argmax(np.abs(vector))]
    if pivot == 0:
        return vector
    return vector * (abs(pivot) / pivot)


def lowest_eigenpair(
    operator: Operator,
    v0: Optional[np.ndarray] = None,
    tol: float = 0.0,
    max_attempts: int = 3,
    base_ncv: int = 20,
    maxiter: Optional[int] = None,
) -> tuple[float, np.ndarray]:
    """Return the lowest eigenvalue and its normalized eigenvector.

    Args:
        operator: Real symmetric (or Hermitian) operator
        v0: Starting vector for the Lanczos iteration
        tol: ARPACK relative tolerance (0 = machine precision)
        max_attempts: Number of ARPACK attempts, each with a doubled Krylov space
        base_ncv: Krylov space size of the first attempt
        maxiter: ARPACK restart limit per attempt (None = ARPACK default)

    Raises:
        ConvergenceError: If ARPACK does not converge after all attempts
    """
    op = aslinearoperator(operator)
    n = op.shape[0]
    if n <= DENSE_LIMIT:
        dense = op.matmat(np.eye(n, dtype=op.dtype))
        dense = 0.5 * (dense + dense.conj().T)
        values, vectors = la.eigh(dense)
        return float(values[0]), fix_phase(vectors[:, 0])

    if v0 is None or not np.any(v0):
        v0 = np.ones(n, dtype=op.dtype)
    v0 = v0 / np.linalg.norm(v0)

    try:
        for attempt in Retrying(
            stop=stop_after_attempt(max_attempts),
            retry=retry_if_exception_type(ArpackNoConvergence),
            reraise=True,
        ):
            with attempt:
                number = attempt.retry_state.attempt_number
                ncv = min(n - 1, base_ncv * 2 ** (number - 1))
                if number > 1:
                    logger.debug("Retrying Lanczos ground-state search with ncv=%d", ncv)
                values, vectors = eigsh(
                    op, k=1, which="SA", v0=v0, ncv=ncv, tol=tol, maxiter=maxiter
                )
    except ArpackNoConvergence as exc:
        residual = None
        if len(exc.eigenvalues):
            vec = exc.eigenvectors[:, 0]
            residual = float(np.linalg.norm(op.matvec(vec) - exc.eigenvalues[0] * vec))
        raise ConvergenceError(
            f"Lanczos eigen-solver did not converge after {max_attempts} attempts",
            residual=residual,
        ) from exc

    vector = vectors[:, 0]
    return float(values[0]), fix_phase(vector / np.linalg.norm(vector))


def residual_norm(operator: Operator, value: float, vector: np.ndarray) -> float:
    """Return ||A v - lambda v||."""
    op = aslinearoperator(operator)
    return float(np.linalg.norm(op.matvec(vector) - value * vector))


def _tridiagonal_exp(alpha: np.ndarray, beta: np.ndarray, tau: float) -> np.ndarray:
    """First column of exp(-i tau T) for the symmetric tridiagonal T(alpha, beta)."""
    if len(alpha) == 1:
        return np.array([np.exp(-1j * tau * alpha[0])])
    values, vectors = la.eigh_tridiagonal(alpha, beta)
    return vectors @ (np.exp(-1j * tau * values) * vectors[0, :])


def _lanczos_propagate(
    matvec: MatVec, psi: np.ndarray, tau: float, krylov_dim: int, tol: float
) -> tuple[np.ndarray, float]:
    """One Lanczos projection of exp(-i tau H) psi; returns (result, error estimate)."""
    beta0 = float(np.linalg.norm(psi))
    if beta0 == 0.0:
        return psi.copy(), 0.0
    dim = min(krylov_dim, psi.size)
    basis = np.zeros((dim, psi.size), dtype=complex)
    alpha = np.zeros(dim)
    beta = np.zeros(dim)
    basis[0] = psi / beta0

    coeffs = np.array([1.0 + 0j])
    error = 0.0
    size = 1
    for j in range(dim):
        w = matvec(basis[j])
        alpha[j] = float(np.vdot(basis[j], w).real)
        w = w - alpha[j] * basis[j]
        if j > 0:
            w = w - beta[j - 1] * basis[j - 1]
        w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta[j] = float(np.linalg.norm(w))

        size = j + 1
        coeffs = _tridiagonal_exp(alpha[:size], beta[: size - 1], tau)
        error = beta0 * beta[j] * abs(coeffs[-1])
        breakdown = beta[j] <= 1e-13 * max(1.0, abs(alpha[j]))
        if breakdown or error <= tol or size == dim:
            if breakdown:
                error = 0.0
            break
        basis[j + 1] = w / beta[j]

    return beta0 * (basis[:size].T @ coeffs), error


def expm_krylov(
    matvec: MatVec,
    psi: np.ndarray,
    tau: float,
    krylov_dim: int = 12,
    tol: float = 1e-12,
    max_halvings: int = 20,
) -> np.ndarray:
    """Apply exp(-i tau H) to psi for a Hermitian H given by ``matvec``.

    The step is split into halves until the Lanczos error estimate of every
    sub-step is below ``tol``.

    Raises:
        ConvergenceError: If more than ``max_halvings`` halvings would be needed
    """
    out = np.asarray(psi, dtype=complex)
    if tau == 0.0:
        return out.copy()
    remaining = tau
    step = tau
    floor = abs(tau) * 2.0**-max_halvings
    while abs(remaining) > abs(tau) * 1e-13:
        if abs(step) > abs(remaining):
            step = remaining
        result, error = _lanczos_propagate(matvec, out, step, krylov_dim, tol)
        if error > tol:
            step *= 0.5
            if abs(step) < floor:
                raise ConvergenceError(
                    "Krylov propagator could not reach its tolerance", residual=error
                )
            continue
        out = result
        remaining -= step
    return out
