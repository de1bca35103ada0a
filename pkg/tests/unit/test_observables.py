"""Tests for observables module."""

import logging

import numpy as np
import pytest

from src.crab_mott.exceptions import DomainError, ShapeError
from src.crab_mott.models import DefectMeasure, LatticeParams, SiteProfile
from src.crab_mott.observables import (
    defect_bound,
    defect_density,
    residual_energy_per_site,
    site_profile,
)


@pytest.fixture
def params():
    """Four-site chain at unit filling."""
    return LatticeParams(n_sites=4, n_max=3)


class TestSiteProfile:
    """Tests for site_profile and SiteProfile validation."""

    def test_rounding_noise_removed(self, params):
        """Test tiny negative fluctuations from round-off become zero."""
        profile = site_profile([1, 1, 1, 1], [0.0, -1e-16, 0.1, 0.0], params)
        assert profile.fluctuations == (0.0, 0.0, 0.1, 0.0)

    def test_atom_number_checked(self):
        """Test occupations must sum to filling * N."""
        with pytest.raises(DomainError):
            SiteProfile(occupations=(1.0, 1.0, 1.0, 0.5), fluctuations=(0.0,) * 4, n_sites=4)

    def test_length_checked(self):
        """Test vectors must have one entry per site."""
        with pytest.raises(ShapeError):
            SiteProfile(occupations=(2.0, 2.0), fluctuations=(0.0,), n_sites=2)

    def test_distributions_validated(self, params):
        """Test each site needs a normalized distribution of the same length."""
        with pytest.raises(ShapeError):
            site_profile([1, 1, 1, 1], [0] * 4, params, [[0.0, 1.0]] * 3)
        with pytest.raises(DomainError):
            SiteProfile((1.0, 1.0), (0.0, 0.0), 2, distributions=((0.0, 0.9), (0.0, 1.0)))

    def test_distributions_renormalized(self, params):
        """Test backend distributions are rescaled to unit weight per site."""
        profile = site_profile([1, 1, 1, 1], [0] * 4, params, np.full((4, 4), 0.25 + 1e-10))
        assert all(sum(site) == pytest.approx(1.0, abs=1e-15) for site in profile.distributions)

    def test_reflected(self, params):
        """Test the mirrored profile reverses both vectors."""
        profile = site_profile([2, 0, 1, 1], [0.5, 0.0, 0.1, 0.2], params)
        mirrored = profile.reflected()
        assert mirrored.occupations == (1.0, 1.0, 0.0, 2.0)
        assert mirrored.fluctuations == (0.2, 0.1, 0.0, 0.5)


def fock_profile(occupations, params):
    """Profile of a single Fock state: every site has a sharp occupation."""
    dist = np.zeros((len(occupations), params.n_max + 1))
    dist[np.arange(len(occupations)), occupations] = 1.0
    return site_profile(occupations, [0] * len(occupations), params, dist)


class TestDefectDensity:
    """Tests for defect_density."""

    def test_mott_state_has_no_defects(self, params):
        """Test one atom per site gives rho = 0."""
        assert defect_density(fock_profile([1, 1, 1, 1], params)) == 0.0

    def test_doublon_hole_pair(self, params):
        """Test a doublon and a hole give rho = 2/N."""
        profile = fock_profile([2, 0, 1, 1], params)
        assert defect_density(profile) == pytest.approx(0.5)
        assert defect_density(profile, measure=DefectMeasure.MEAN_OCCUPATION) == pytest.approx(0.5)

    def test_pair_superposition(self):
        """Test (|2,0> + |0,2>)/sqrt(2) counts defects although <n_i> = 1 on both sites."""
        params = LatticeParams(n_sites=2, n_max=2)
        dist = [[0.5, 0.0, 0.5], [0.5, 0.0, 0.5]]
        profile = site_profile([1.0, 1.0], [1.0, 1.0], params, dist)
        assert defect_density(profile) == pytest.approx(1.0)
        assert defect_density(profile, measure=DefectMeasure.MEAN_OCCUPATION) == 0.0

    def test_distributions_required(self, params):
        """Test counting per Fock state needs measured distributions."""
        profile = site_profile([1, 1, 1, 1], [0] * 4, params)
        with pytest.raises(DomainError, match="distributions"):
            defect_density(profile)
        assert defect_density(profile, measure=DefectMeasure.MEAN_OCCUPATION) == 0.0

    def test_reference_profile(self, params):
        """Test rho is measured against an explicit reference when given."""
        profile = site_profile([0.8, 1.2, 1.2, 0.8], [0] * 4, params)
        mean = DefectMeasure.MEAN_OCCUPATION
        reference = [0.8, 1.2, 1.2, 0.8]
        assert defect_density(profile, reference, mean) == pytest.approx(0.0)
        assert defect_density(profile, measure=mean) == pytest.approx(0.2)

    def test_reference_with_distributions(self, params):
        """Test a sharp state measured against a fractional reference."""
        profile = fock_profile([1, 1, 2, 0], params)
        assert defect_density(profile, reference=[1.0, 1.0, 1.5, 0.5]) == pytest.approx(0.25)

    def test_reference_shape(self, params):
        """Test a reference of the wrong length is rejected."""
        profile = fock_profile([1, 1, 1, 1], params)
        with pytest.raises(DomainError):
            defect_density(profile, reference=[1.0, 1.0])

    def test_reflection_symmetry(self, params):
        """Test rho is unchanged under j -> N + 1 - j."""
        profile = fock_profile([3, 0, 1, 0], params)
        assert defect_density(profile) == pytest.approx(defect_density(profile.reflected()))
        assert profile.reflected().distributions[0] == profile.distributions[-1]

    @pytest.mark.parametrize("n_sites,n_max,expected", [(4, 2, 3.0), (2, 2, 2.0), (10, 4, 7.2)])
    def test_bound(self, n_sites, n_max, expected):
        """Test the unit-filling bound 2 (1 - 1/N) n_max."""
        assert defect_bound(n_sites, n_max) == pytest.approx(expected)

    def test_all_atoms_on_one_site_within_bound(self):
        """Test the extreme state stays within the bound."""
        params = LatticeParams(n_sites=4, n_max=4)
        rho = defect_density(fock_profile([0, 0, 0, 4], params))
        assert rho == pytest.approx(1.5)
        assert rho <= defect_bound(4, 4)


class TestResidualEnergy:
    """Tests for residual_energy_per_site."""

    def test_per_site(self):
        """Test (E(T) - E_G) / N."""
        assert residual_energy_per_site(-1.0, -3.0, 4) == pytest.approx(0.5)

    def test_round_off_clamped_silently(self, caplog):
        """Test values just below zero are clamped without a warning."""
        with caplog.at_level(logging.WARNING):
            assert residual_energy_per_site(-3.0 - 1e-12, -3.0, 4) == 0.0
        assert not caplog.records

    def test_large_negative_warns(self, caplog):
        """Test a clearly negative residual is clamped and logged."""
        with caplog.at_level(logging.WARNING):
            assert residual_energy_per_site(-3.1, -3.0, 4) == 0.0
        assert "variational floor" in caplog.text

    def test_invalid_size(self):
        """Test N < 1 is rejected."""
        with pytest.raises(DomainError):
            residual_energy_per_site(0.0, 0.0, 0)
