"""Tests for simplex module."""

import numpy as np
import pytest

from src.crab_mott.exceptions import ConfigurationError
from src.crab_mott.simplex import SearchStopped, SimplexStatus, initial_simplex, minimize

CENTER = np.array([0.3, -0.2, 0.5, 0.1])
WEIGHTS = np.array([1.0, 2.0, 0.5, 1.5])


def quadratic(points):
    """Batch objective with its minimum 0 at CENTER."""
    return [float(np.sum(WEIGHTS * (np.asarray(p) - CENTER) ** 2)) for p in points]


class TestInitialSimplex:
    """Tests for initial_simplex."""

    def test_shape(self):
        """Test x0 plus one displaced vertex per coordinate."""
        vertices = initial_simplex([1.0, 2.0], 0.5)
        assert np.array_equal(vertices, [[1.0, 2.0], [1.5, 2.0], [1.0, 2.5]])

    def test_per_coordinate_scale(self):
        """Test a scale vector displaces each coordinate by its own step."""
        vertices = initial_simplex([0.0, 0.0], [0.1, 0.3])
        assert np.allclose(vertices[1:], np.diag([0.1, 0.3]))

    def test_zero_scale(self):
        """Test a zero step would make a degenerate simplex."""
        with pytest.raises(ConfigurationError):
            initial_simplex([0.0, 0.0], [0.1, 0.0])


class TestMinimize:
    """Tests for minimize."""

    def test_quadratic(self):
        """Test a 4D quadratic is minimized below 1e-6 within 500 evaluations."""
        result = minimize(quadratic, np.ones(4), budget=500, scale=0.2, spread_tol=1e-14)
        assert result.fun < 1e-6
        assert result.n_evaluations <= 500
        assert np.allclose(result.x, CENTER, atol=2e-3)

    def test_budget_is_exact(self):
        """Test the objective is never called for more points than the budget."""
        seen = []

        def objective(points):
            seen.extend(points)
            return quadratic(points)

        result = minimize(objective, np.ones(4), budget=7)
        assert result.status is SimplexStatus.BUDGET_EXHAUSTED
        assert result.n_evaluations == len(seen) == 7

    def test_budget_below_dimension(self):
        """Test budget < dim + 1 is a configuration error."""
        with pytest.raises(ConfigurationError):
            minimize(quadratic, np.ones(4), budget=4)

    def test_empty_vector(self):
        """Test a zero-dimensional search is rejected."""
        with pytest.raises(ConfigurationError):
            minimize(quadratic, np.array([]), budget=10)

    def test_converges_on_flat_spread(self):
        """Test the search stops once the vertex values agree."""
        result = minimize(quadratic, np.ones(4), budget=10_000, spread_tol=1e-8)
        assert result.status is SimplexStatus.CONVERGED
        assert result.n_evaluations < 10_000

    def test_stopped_by_objective(self):
        """Test SearchStopped ends the search with status STOPPED."""
        calls = []

        def objective(points):
            values = quadratic(points)
            calls.extend(values)
            if min(values) < 0.5:
                raise SearchStopped
            return values

        result = minimize(objective, np.ones(4), budget=500)
        assert result.status is SimplexStatus.STOPPED
        assert min(calls) < 0.5
        assert result.n_evaluations == len(calls)

    def test_failures_are_infinite(self):
        """Test +inf values (failed evaluations) are stepped away from."""

        def objective(points):
            return [np.inf if p[0] > 1.05 else v for p, v in zip(points, quadratic(points))]

        result = minimize(objective, np.ones(4), budget=500, spread_tol=1e-12)
        assert np.isfinite(result.fun)
        assert result.fun < 1e-4

    def test_deterministic(self):
        """Test identical inputs give identical searches."""
        a = minimize(quadratic, np.ones(4), budget=120)
        b = minimize(quadratic, np.ones(4), budget=120)
        assert np.array_equal(a.x, b.x)
        assert a.fun == b.fun
