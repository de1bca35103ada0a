"""CRAB pulse parameterization: guess ramps, randomized Fourier corrections, rendering.

c(t) = c0(t) * f(t), with g(t) = 1 + sum_k [A_k sin(nu_k t) + B_k cos(nu_k t)] and
f(t) = g(t) - (1 - t/T)(g(0) - 1) - (t/T)(g(T) - 1), so that c(0) and c(T) always
equal the guess boundaries.
"""

import logging
import math
import warnings
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from .exceptions import DomainError, ShapeError
from .lattice import ratio_to_depth
from .models import ControlTrajectory, GuessKind, PulseSpec

logger = logging.getLogger(__name__)

# Clamp floor for rendered pulses, relative to the smaller boundary value.
FLOOR_FRACTION = 1e-4


def time_grid(t_total: float, dt: float) -> np.ndarray:
    """Uniform grid 0 = t_0 < ... < t_n = T with spacing T/n <= dt."""
    if t_total < 0:
        raise DomainError(f"total time cannot be negative, got {t_total}")
    if dt <= 0:
        raise DomainError(f"time step must be positive, got {dt}")
    n_steps = math.ceil(t_total / dt - 1e-9) if t_total > 0 else 0
    return np.linspace(0.0, t_total, n_steps + 1)


def draw_jitter(n_modes: int, seed: int, restart: int = 0) -> tuple:
    """Frequency jitter r_k drawn uniformly from [0, 1) for one restart round."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, restart]))
    return tuple(rng.uniform(0.0, 1.0, size=n_modes))


def initial_spec(
    guess_kind: GuessKind,
    t_total: float,
    n_modes: int,
    boundaries: Sequence[float] = (0.52, 2.4e-3),
    seed: int = 0,
    guess_table: Sequence = (),
) -> PulseSpec:
    """Uncorrected pulse (all A_k = B_k = 0) with jitter drawn for restart 0."""
    return PulseSpec(
        guess_kind=guess_kind,
        t_total=t_total,
        n_modes=n_modes,
        sin_coeffs=(0.0,) * n_modes,
        cos_coeffs=(0.0,) * n_modes,
        freq_jitter=draw_jitter(n_modes, seed, 0),
        boundary_values=tuple(boundaries),
        rng_seed=seed,
        guess_table=tuple(guess_table),
    )


def random_correction(spec: PulseSpec, seed: int, amplitude: float = 0.2) -> PulseSpec:
    """Copy of ``spec`` with normally distributed Fourier coefficients of the given scale."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
    vector = amplitude * rng.standard_normal(2 * spec.n_modes)
    return spec.with_coefficients(vector)


def guess_pulse(
    kind: GuessKind,
    boundaries: Sequence[float],
    t_total: float,
    grid: np.ndarray,
    table: Sequence = (),
) -> np.ndarray:
    """Sample the guess ramp c0(t) on ``grid``.

    Raises:
        DomainError: If a boundary is not positive
    """
    start, end = (float(b) for b in boundaries)
    if start <= 0 or end <= 0:
        raise DomainError(f"guess boundaries must be positive, got ({start}, {end})")
    t = np.asarray(grid, dtype=float)
    s = np.clip(t / t_total, 0.0, 1.0)
    if kind is GuessKind.EXPONENTIAL:
        values = start * (end / start) ** s
    elif kind is GuessKind.LINEAR:
        values = start + (end - start) * s
    elif kind is GuessKind.CUSTOM_TABLE:
        if len(table) < 2:
            raise ShapeError("custom-table guess needs at least two (t, J/U) points")
        times, points = zip(*table)
        values = PchipInterpolator(times, points, extrapolate=True)(np.clip(t, 0.0, t_total))
    else:
        raise DomainError(f"unknown guess kind {kind}")
    values = np.where(t <= 0.0, start, values)
    return np.where(t >= t_total, end, values)


def correction(spec: PulseSpec, t: np.ndarray) -> np.ndarray:
    """Boundary-pinned correction factor f(t)."""
    t = np.asarray(t, dtype=float)
    if spec.n_modes == 0:
        return np.ones_like(t)
    nu = spec.frequencies
    a = np.asarray(spec.sin_coeffs)
    b = np.asarray(spec.cos_coeffs)

    def g(times: np.ndarray) -> np.ndarray:
        phase = np.outer(times, nu)
        return 1.0 + np.sin(phase) @ a + np.cos(phase) @ b

    ends = g(np.array([0.0, spec.t_total]))
    s = t / spec.t_total
    return g(t) - (1.0 - s) * (ends[0] - 1.0) - s * (ends[1] - 1.0)


def _sample(spec: PulseSpec, t: np.ndarray) -> tuple[np.ndarray, bool]:
    guess = guess_pulse(spec.guess_kind, spec.boundary_values, spec.t_total, t, spec.guess_table)
    values = guess * correction(spec, t)
    start, end = spec.boundary_values
    values = np.where(t <= 0.0, start, values)
    values = np.where(t >= spec.t_total, end, values)
    floor = FLOOR_FRACTION * min(start, end)
    clamped = bool(np.any(values < floor))
    return np.maximum(values, floor), clamped


def render_pulse(spec: PulseSpec, grid: np.ndarray) -> ControlTrajectory:
    """Sample c(t) on ``grid`` and at every step midpoint.

    Samples below 1e-4 of the smaller boundary are lifted to that floor and the
    trajectory is flagged as clamped.

    Raises:
        DomainError: If the grid does not span [0, T] uniformly
    """
    t = np.asarray(grid, dtype=float)
    if len(t) < 1 or t[0] != 0.0 or not math.isclose(t[-1], spec.t_total, rel_tol=1e-12):
        raise DomainError(f"grid must span [0, {spec.t_total}]")
    t = t.copy()
    t[-1] = spec.t_total
    values, clamped = _sample(spec, t)
    midpoints, mid_clamped = _sample(spec, 0.5 * (t[:-1] + t[1:]))
    if clamped or mid_clamped:
        logger.warning("Rendered pulse dropped below its positivity floor and was clamped")
    return ControlTrajectory(t, values, midpoints, clamped or mid_clamped)


def render_guess(spec: PulseSpec, grid: np.ndarray) -> ControlTrajectory:
    """The uncorrected guess ramp of ``spec`` on ``grid``."""
    zero = replace(
        spec, sin_coeffs=(0.0,) * spec.n_modes, cos_coeffs=(0.0,) * spec.n_modes
    )
    return render_pulse(zero, grid)


def display_depths(values: np.ndarray) -> np.ndarray:
    """V/E_r for each J/U through the calibrated map, NaN outside its domain."""
    depths = np.full(len(values), math.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i, ratio in enumerate(values):
            try:
                depths[i] = ratio_to_depth(float(ratio))
            except DomainError:
                pass
    return depths


def scale_trajectory(trajectory: ControlTrajectory, epsilon: float) -> ControlTrajectory:
    """Global amplitude miscalibration c -> (1 + epsilon) c, boundaries included."""
    if 1.0 + epsilon <= 0:
        raise DomainError(f"scale 1 + {epsilon} must be positive")
    mid = trajectory.midpoint_values
    return ControlTrajectory(
        trajectory.times.copy(),
        trajectory.values * (1.0 + epsilon),
        None if mid is None else mid * (1.0 + epsilon),
        trajectory.clamped,
    )


def smooth_noise(t: np.ndarray, t_total: float, seed: int, n_modes: int = 8) -> np.ndarray:
    """Random sine series vanishing at 0 and T with unit RMS over [0, T]."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD157]))
    k = np.arange(1, n_modes + 1)
    amplitudes = rng.standard_normal(n_modes) / k
    amplitudes = amplitudes / math.sqrt(0.5 * float(np.sum(amplitudes**2)))
    phases = np.outer(np.asarray(t, dtype=float), np.pi * k / t_total)
    return np.sin(phases) @ amplitudes


def noisy_trajectory(
    trajectory: ControlTrajectory, epsilon: float, seed: int, n_modes: int = 8
) -> ControlTrajectory:
    """Multiplicative noise c(t) -> c(t)(1 + epsilon eta(t)); endpoints stay fixed."""
    t_total = trajectory.t_total
    floor = FLOOR_FRACTION * min(trajectory.start, trajectory.end)

    def distort(times: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, bool]:
        out = values * (1.0 + epsilon * smooth_noise(times, t_total, seed, n_modes))
        return np.maximum(out, floor), bool(np.any(out < floor))

    values, clamped = distort(trajectory.times, trajectory.values)
    values[0], values[-1] = trajectory.start, trajectory.end
    mid: Optional[np.ndarray] = None
    if trajectory.midpoint_values is not None:
        t = trajectory.times
        mid, mid_clamped = distort(0.5 * (t[:-1] + t[1:]), trajectory.midpoint_values)
        clamped = clamped or mid_clamped
    return ControlTrajectory(trajectory.times.copy(), values, mid, trajectory.clamped or clamped)
