"""Figures of merit computed from measured site profiles."""

import logging
from typing import Optional, Sequence

import numpy as np

from .exceptions import DomainError
from .models import DefectMeasure, LatticeParams, SiteProfile

logger = logging.getLogger(__name__)

# Energies this far below E_G are solver noise and are clamped to zero.
VARIATIONAL_SLACK = 1e-9


def site_profile(
    occupations: Sequence[float],
    fluctuations: Sequence[float],
    params: LatticeParams,
    distributions: Optional[np.ndarray] = None,
) -> SiteProfile:
    """Wrap backend expectation values into a validated SiteProfile."""
    fluct = np.asarray(fluctuations, dtype=float)
    # round-off can leave -1e-16 on sites in a Fock state
    fluct = np.where((fluct < 0) & (fluct > -1e-12), 0.0, fluct)
    dist: tuple = ()
    if distributions is not None:
        rows = np.asarray(distributions, dtype=float)
        dist = tuple(map(tuple, rows / rows.sum(axis=1, keepdims=True)))
    return SiteProfile(
        occupations=tuple(np.asarray(occupations, dtype=float)),
        fluctuations=tuple(fluct),
        n_sites=params.n_sites,
        filling=params.filling,
        distributions=dist,
    )


def defect_density(
    profile: SiteProfile,
    reference: Optional[Sequence[float]] = None,
    measure: DefectMeasure = DefectMeasure.OCCUPATION_NUMBER,
) -> float:
    """Mean per-site deviation of the occupation from the reference.

    OCCUPATION_NUMBER: rho = (1/N) sum_i sum_n p_i(n) |n - reference_i|, the
    defect count a site-resolved measurement would see. MEAN_OCCUPATION:
    rho = (1/N) sum_i |<n_i> - reference_i|, which stays near zero on a
    homogeneous chain whatever the ramp does.

    The reference defaults to the nominal filling on every site; pass the
    ground-state occupations of a trapped system to measure against its own
    profile instead.

    Raises:
        DomainError: If the reference has the wrong length or the profile
            lacks the distributions the measure needs
    """
    occ = profile.occupation_array
    if reference is None:
        target = np.full(profile.n_sites, float(profile.filling))
    else:
        target = np.asarray(reference, dtype=float)
        if target.shape != occ.shape:
            raise DomainError("reference profile must have one entry per site")
    if measure is DefectMeasure.MEAN_OCCUPATION:
        rho = float(np.mean(np.abs(occ - target)))
    else:
        dist = profile.distribution_array
        if dist is None:
            raise DomainError("profile carries no occupation distributions")
        n = np.arange(dist.shape[1], dtype=float)
        rho = float(np.mean(np.sum(dist * np.abs(n[None, :] - target[:, None]), axis=1)))
    _check_defect_bound(rho, profile)
    return rho


def defect_bound(n_sites: int, n_max: int) -> float:
    """Largest defect density a unit-filling state can show, 2 (1 - 1/N) n_max."""
    return 2.0 * (1.0 - 1.0 / n_sites) * n_max


def _check_defect_bound(rho: float, profile: SiteProfile) -> None:
    if profile.filling != 1:
        return
    n_max_seen = max(1, int(np.ceil(max(profile.occupations))))
    if rho > defect_bound(profile.n_sites, n_max_seen) + 1e-12:
        raise DomainError(f"defect density {rho} violates the unit-filling bound")


def residual_energy_per_site(e_final: float, e_ground: float, n_sites: int) -> float:
    """(E(T) - E_G) / N, clamped to zero when slightly negative from solver residuals."""
    if n_sites < 1:
        raise DomainError(f"n_sites must be >= 1, got {n_sites}")
    value = (e_final - e_ground) / n_sites
    if value < 0:
        if value < -VARIATIONAL_SLACK:
            logger.warning(
                "Residual energy per site %.3e is below the variational floor; clamped to 0", value
            )
        value = 0.0
    return value
