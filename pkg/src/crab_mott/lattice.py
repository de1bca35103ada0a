"""Bose-Hubbard lattice model and the lattice-depth calibration.

H = sum_j [ -J (b_j^dag b_{j+1} + h.c.) + Omega (j - N/2)^2 n_j + U/2 (n_j^2 - n_j) ]

U is held fixed (the unit of energy) and J/U is the control. The depth map
V/E_r <-> J/U is a calibrated log-linear interpolation, ln(J/U) affine in
sqrt(V/E_r), passing exactly through V = 2 E_r <-> 0.52 and V = 22 E_r <-> 2.4e-3.
It is used for parameterization and display only.
"""

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .models import ControlPoint, LatticeParams

logger = logging.getLogger(__name__)

# Calibration anchors of the depth map: (V/E_r, J/U)
SHALLOW_ANCHOR = (2.0, 0.52)
DEEP_ANCHOR = (22.0, 2.4e-3)
VALID_DEPTHS = (2.0, 22.0)
CRITICAL_RATIO = 0.083

_SLOPE = (math.log(DEEP_ANCHOR[1]) - math.log(SHALLOW_ANCHOR[1])) / (
    math.sqrt(DEEP_ANCHOR[0]) - math.sqrt(SHALLOW_ANCHOR[0])
)
_INTERCEPT = math.log(SHALLOW_ANCHOR[1]) - _SLOPE * math.sqrt(SHALLOW_ANCHOR[0])
MAX_RATIO = math.exp(_INTERCEPT)  # J/U at V = 0, the edge of the map's domain


class DepthExtrapolationWarning(UserWarning):
    """A lattice depth outside the model validity window [2, 22] E_r was used."""


def _warn_if_outside(depth: float) -> None:
    low, high = VALID_DEPTHS
    if depth < low - 1e-9 or depth > high + 1e-9:
        warnings.warn(
            f"lattice depth {depth:.4g} E_r lies outside the calibrated window [{low}, {high}]",
            DepthExtrapolationWarning,
            stacklevel=3,
        )


def depth_to_ratio(depth: float) -> float:
    """Map a lattice depth V/E_r to the control ratio J/U.

    Raises:
        DomainError: If depth <= 0
    """
    if depth <= 0:
        raise DomainError(f"lattice depth must be positive, got {depth}")
    _warn_if_outside(depth)
    return math.exp(_INTERCEPT + _SLOPE * math.sqrt(depth))


def ratio_to_depth(ratio: float) -> float:
    """Map J/U back to the lattice depth V/E_r (inverse of depth_to_ratio).

    Raises:
        DomainError: If ratio <= 0 or above the map's V = 0 limit
    """
    if ratio <= 0:
        raise DomainError(f"J/U must be positive, got {ratio}")
    root = (math.log(ratio) - _INTERCEPT) / _SLOPE
    if root <= 0:
        raise DomainError(f"J/U = {ratio} exceeds the calibrated map's limit {MAX_RATIO:.4f}")
    depth = root * root
    _warn_if_outside(depth)
    return depth


def control_point(time: float, ratio: float) -> ControlPoint:
    """Build a ControlPoint, deriving the display depth from the ratio."""
    return ControlPoint(time=time, ratio=ratio, depth=ratio_to_depth(ratio))


def critical_depth() -> float:
    """Lattice depth at which J/U crosses the 1D critical value J_c/U ~ 0.083."""
    return ratio_to_depth(CRITICAL_RATIO)


def annihilation(n_max: int) -> np.ndarray:
    """Truncated bosonic annihilation operator b with b|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)


def number(n_max: int) -> np.ndarray:
    """Local density operator n = b^dag b on occupations 0..n_max."""
    return np.diag(np.arange(n_max + 1, dtype=float))


def hopping_operator(n_max: int) -> np.ndarray:
    """Two-site operator -(b^dag x b + b x b^dag), to be scaled by J."""
    b = annihilation(n_max)
    return -(np.kron(b.T, b) + np.kron(b, b.T))


def site_operator(params: LatticeParams, site: int) -> np.ndarray:
    """On-site term Omega (j - N/2)^2 n + U/2 (n^2 - n) for 0-based ``site``."""
    occ = np.arange(params.local_dim, dtype=float)
    trap = params.trap_energies[site]
    return np.diag(trap * occ + 0.5 * params.interaction * (occ * occ - occ))


@dataclass(frozen=True)
class HamiltonianTerms:
    """
    Local terms of the Bose-Hubbard Hamiltonian at fixed J/U.

    Attributes:
        bond_terms: One (d^2 x d^2) hopping operator per bond (j, j+1)
        site_terms: One (d x d) trap + interaction operator per site
    """

    bond_terms: tuple
    site_terms: tuple

    @property
    def n_sites(self) -> int:
        return len(self.site_terms)


def hamiltonian_terms(params: LatticeParams, ratio: float) -> HamiltonianTerms:
    """Assemble the local terms of H at control value ``ratio`` = J/U.

    J/U = 0 is accepted (the atomic limit); negative values are not.

    Raises:
        DomainError: If ratio < 0
    """
    if ratio < 0 or not math.isfinite(ratio):
        raise DomainError(f"J/U must be a nonnegative finite number, got {ratio}")
    hop = ratio * params.interaction * hopping_operator(params.n_max)
    bonds = tuple(hop.copy() for _ in range(params.n_sites - 1))
    sites = tuple(site_operator(params, j) for j in range(params.n_sites))
    logger.debug("Assembled %d bond and %d site terms at J/U=%.6g", len(bonds), len(sites), ratio)
    return HamiltonianTerms(bond_terms=bonds, site_terms=sites)


def bond_hamiltonian(params: LatticeParams, ratio: float, bond: int) -> np.ndarray:
    """Two-site Hamiltonian of ``bond`` with site terms split between adjacent bonds.

    Interior sites contribute half their term to each of their two bonds; the
    first and last site give their full term to their only bond.
    """
    n = params.n_sites
    d = params.local_dim
    left, right = bond, bond + 1
    w_left = 1.0 if left == 0 else 0.5
    w_right = 1.0 if right == n - 1 else 0.5
    eye = np.eye(d)
    h = ratio * params.interaction * hopping_operator(params.n_max)
    h = h + w_left * np.kron(site_operator(params, left), eye)
    h = h + w_right * np.kron(eye, site_operator(params, right))
    return h


def total_number_operator(n_sites: int, n_max: int) -> np.ndarray:
    """Dense total-number operator on the full truncated space (small N only)."""
    d = n_max + 1
    occ = np.arange(d, dtype=float)
    total = np.zeros(d**n_sites)
    for j in range(n_sites):
        shape = [1] * n_sites
        shape[j] = d
        total = total + np.broadcast_to(occ.reshape(shape), (d,) * n_sites).reshape(-1)
    return np.diag(total)


def dense_hamiltonian(params: LatticeParams, ratio: float) -> np.ndarray:
    """Dense H on the full truncated product space (d^N), for checks at small N."""
    terms = hamiltonian_terms(params, ratio)
    d = params.local_dim
    n = params.n_sites
    h = np.zeros((d**n, d**n))
    for j, term in enumerate(terms.site_terms):
        h += np.kron(np.kron(np.eye(d**j), term), np.eye(d ** (n - j - 1)))
    for j, term in enumerate(terms.bond_terms):
        h += np.kron(np.kron(np.eye(d**j), term), np.eye(d ** (n - j - 2)))
    return h
