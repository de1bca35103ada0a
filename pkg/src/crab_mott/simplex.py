"""Nelder-Mead direct search with batch evaluation of independent vertices.

The objective receives a list of points and returns their values, so that the
initial polytope and shrink steps can be evaluated in parallel. It may raise
SearchStopped to end the search early (e.g. when a halting threshold is met).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

BatchObjective = Callable[[list], Sequence[float]]

REFLECTION = 1.0
EXPANSION = 2.0
CONTRACTION = 0.5
SHRINK = 0.5


class SearchStopped(Exception):
    """Raised by an objective to end the search immediately."""


class SimplexStatus(Enum):
    CONVERGED = "converged"
    BUDGET_EXHAUSTED = "budget-exhausted"
    STOPPED = "stopped"


@dataclass
class SimplexState:
    """
    Polytope of a Nelder-Mead search.

    Attributes:
        vertices: (dim + 1, dim) array of coefficient vectors
        values: Cached objective value of every vertex
        iteration: Completed iterations
    """

    vertices: np.ndarray
    values: np.ndarray
    iteration: int = 0

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        n_vertices, dim = self.vertices.shape
        if n_vertices != dim + 1 or self.values.shape != (n_vertices,):
            raise ConfigurationError("a simplex needs dim + 1 vertices with one value each")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.values))

    @property
    def best(self) -> np.ndarray:
        return self.vertices[self.best_index]

    @property
    def best_value(self) -> float:
        return float(self.values[self.best_index])

    @property
    def spread(self) -> float:
        """max - min of the cached values (inf while any vertex failed)."""
        if not np.all(np.isfinite(self.values)):
            return np.inf
        return float(self.values.max() - self.values.min())

    def ordered(self) -> "SimplexState":
        order = np.argsort(self.values, kind="stable")
        return SimplexState(self.vertices[order], self.values[order], self.iteration)


@dataclass
class SimplexResult:
    """Outcome of one Nelder-Mead descent."""

    x: np.ndarray
    fun: float
    status: SimplexStatus
    n_evaluations: int
    state: SimplexState


class _Budget(Exception):
    pass


class _CountingObjective:
    def __init__(self, objective: BatchObjective, budget: int):
        self.objective = objective
        self.budget = budget
        self.used = 0

    def __call__(self, points: list) -> np.ndarray:
        remaining = self.budget - self.used
        if remaining <= 0:
            raise _Budget
        partial = len(points) > remaining
        batch = points[:remaining]
        self.used += len(batch)
        values = np.asarray(self.objective(batch), dtype=float)
        if partial:
            raise _Budget
        return values


def initial_simplex(x0: Sequence[float], scale: Union[float, Sequence[float]] = 0.2) -> np.ndarray:
    """x0 plus one vertex displaced by ``scale`` along each coordinate."""
    x0 = np.asarray(x0, dtype=float)
    steps = np.broadcast_to(np.asarray(scale, dtype=float), x0.shape)
    if np.any(steps == 0):
        raise ConfigurationError("simplex scale must be nonzero along every coordinate")
    return np.vstack([x0, x0 + np.diag(steps)])


def minimize(
    objective: BatchObjective,
    x0: Sequence[float],
    budget: int,
    scale: Union[float, Sequence[float]] = 0.2,
    spread_tol: float = 1e-10,
) -> SimplexResult:
    """Minimize ``objective`` from ``x0`` using at most ``budget`` evaluations.

    Raises:
        ConfigurationError: If budget < dim + 1
    """
    x0 = np.asarray(x0, dtype=float)
    dim = len(x0)
    if dim == 0:
        raise ConfigurationError("cannot run a simplex search over zero parameters")
    if budget < dim + 1:
        raise ConfigurationError(
            f"budget {budget} is below the {dim + 1} evaluations of the initial simplex"
        )

    counted = _CountingObjective(objective, budget)
    vertices = initial_simplex(x0, scale)
    state = SimplexState(vertices, np.full(dim + 1, np.inf))
    status = SimplexStatus.BUDGET_EXHAUSTED
    try:
        state = SimplexState(vertices, counted(list(vertices)))
        while True:
            if state.spread <= spread_tol:
                status = SimplexStatus.CONVERGED
                break
            state = _iterate(state, counted)
    except _Budget:
        status = SimplexStatus.BUDGET_EXHAUSTED
    except SearchStopped:
        status = SimplexStatus.STOPPED

    logger.debug(
        "Simplex finished (%s) after %d evaluations and %d iterations: best %.6e",
        status.value, counted.used, state.iteration, state.best_value,
    )
    return SimplexResult(state.best.copy(), state.best_value, status, counted.used, state)


def _iterate(state: SimplexState, evaluate: _CountingObjective) -> SimplexState:
    """One Nelder-Mead iteration; the polytope is updated in place as values arrive."""
    state = state.ordered()
    x, f = state.vertices, state.values
    centroid = x[:-1].mean(axis=0)
    worst = x[-1]

    def accept(point: np.ndarray, value: float) -> SimplexState:
        x[-1], f[-1] = point, value
        state.iteration += 1
        return state

    reflected = centroid + REFLECTION * (centroid - worst)
    f_r = float(evaluate([reflected])[0])
    if f[0] <= f_r < f[-2]:
        return accept(reflected, f_r)
    if f_r < f[0]:
        expanded = centroid + EXPANSION * (reflected - centroid)
        f_e = float(evaluate([expanded])[0])
        return accept(expanded, f_e) if f_e < f_r else accept(reflected, f_r)

    if f_r < f[-1]:
        contracted = centroid + CONTRACTION * (reflected - centroid)
        f_c = float(evaluate([contracted])[0])
        if f_c <= f_r:
            return accept(contracted, f_c)
    else:
        contracted = centroid + CONTRACTION * (worst - centroid)
        f_c = float(evaluate([contracted])[0])
        if f_c < f[-1]:
            return accept(contracted, f_c)

    shrunk = x[0] + SHRINK * (x[1:] - x[0])
    x[1:] = shrunk
    f[1:] = evaluate(list(shrunk))
    state.iteration += 1
    return state
