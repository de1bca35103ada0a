"""Concurrent evaluation of independent pulse candidates.

Candidates are dispatched to a ThreadPoolExecutor; results come back in
submission order regardless of completion order, so traces do not depend on
the worker count. Each evaluation gets its own wall-clock deadline.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np

from .exceptions import CapacityError, CrabError, EvaluationTimeoutError
from .models import EvaluationRecord, EvaluationStatus, FigureOfMerit

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# evaluate(point, deadline) -> FigureOfMerit
PointEvaluator = Callable[[np.ndarray, Optional[float]], FigureOfMerit]


class EvaluationStats:
    """Statistics for a series of evaluations."""

    def __init__(self):
        self.total = 0
        self.completed = 0
        self.successful = 0
        self.failed = 0
        self.timed_out = 0
        self.start_time: Optional[float] = None
        self.end_time: Optional[float] = None

    def start(self, count: int) -> None:
        self.total += count
        if self.start_time is None:
            self.start_time = time.time()

    def finish(self) -> None:
        self.end_time = time.time()

    def record(self, entry: EvaluationRecord) -> None:
        self.completed += 1
        if entry.is_success:
            self.successful += 1
        elif entry.status is EvaluationStatus.TIMEOUT:
            self.timed_out += 1
        else:
            self.failed += 1

    @property
    def duration(self) -> float:
        """Elapsed seconds."""
        if self.start_time is None:
            return 0.0
        end = self.end_time if self.end_time else time.time()
        return end - self.start_time

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "completed": self.completed,
            "successful": self.successful,
            "failed": self.failed,
            "timed_out": self.timed_out,
            "duration": self.duration,
        }


def evaluate_point(
    evaluate: PointEvaluator, point: np.ndarray, timeout: Optional[float] = None
) -> EvaluationRecord:
    """Run one evaluation and turn the outcome (or failure) into a record.

    The record's index is left at -1; the caller numbers records in trace order.
    """
    coefficients = tuple(float(v) for v in point)
    started = time.monotonic()
    deadline = started + timeout if timeout else None
    try:
        merit = evaluate(point, deadline)
    except EvaluationTimeoutError as e:
        status, error = EvaluationStatus.TIMEOUT, str(e)
    except CapacityError as e:
        status, error = EvaluationStatus.CAPACITY, str(e)
    except (CrabError, np.linalg.LinAlgError) as e:
        status, error = EvaluationStatus.FAILED, str(e)
    else:
        return EvaluationRecord(
            index=-1,
            coefficients=coefficients,
            status=EvaluationStatus.SUCCESS,
            defect_density=merit.defect_density,
            residual_energy_per_site=merit.residual_energy_per_site,
            wall_time=time.monotonic() - started,
            merit=merit,
        )
    logger.warning("Evaluation failed (%s): %s", status.value, error)
    return EvaluationRecord(
        index=-1,
        coefficients=coefficients,
        status=status,
        defect_density=math.nan,
        residual_energy_per_site=math.nan,
        wall_time=time.monotonic() - started,
        error=error,
    )


def map_ordered(
    func: Callable[[T], R],
    items: Sequence[T],
    max_workers: int = 1,
    progress_callback: Optional[Callable[[int, R], None]] = None,
) -> list[R]:
    """Apply ``func`` to every item concurrently; results keep the order of ``items``.

    With max_workers <= 1 the items are processed in the calling thread.
    """
    results: list = [None] * len(items)
    if max_workers <= 1 or len(items) <= 1:
        for i, item in enumerate(items):
            results[i] = func(item)
            if progress_callback:
                progress_callback(i, results[i])
        return results

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_index = {executor.submit(func, item): i for i, item in enumerate(items)}
        for future in as_completed(future_to_index):
            i = future_to_index[future]
            results[i] = future.result()
            if progress_callback:
                progress_callback(i, results[i])
    return results


def evaluate_points(
    evaluate: PointEvaluator,
    points: Sequence[np.ndarray],
    max_workers: int = 1,
    timeout: Optional[float] = None,
    stats: Optional[EvaluationStats] = None,
    progress_callback: Optional[Callable[[EvaluationStats, EvaluationRecord], None]] = None,
) -> list[EvaluationRecord]:
    """Evaluate a batch of coefficient vectors concurrently.

    Args:
        evaluate: Callable(point, deadline) returning a FigureOfMerit
        points: Coefficient vectors to evaluate
        max_workers: Size of the worker pool
        timeout: Wall-clock budget per evaluation in seconds (None = unlimited)
        stats: Statistics object to update
        progress_callback: Called with (stats, record) as each evaluation completes

    Returns:
        One EvaluationRecord per point, in the order of ``points``

    Example:
        >>> records = evaluate_points(lambda x, deadline: merit_of(x), [x0, x1], max_workers=2)
        >>> [r.status for r in records]
    """
    stats = stats or EvaluationStats()
    stats.start(len(points))

    def done(_: int, entry: EvaluationRecord) -> None:
        stats.record(entry)
        if progress_callback:
            progress_callback(stats, entry)

    records = map_ordered(
        lambda point: evaluate_point(evaluate, point, timeout), list(points), max_workers, done
    )
    stats.finish()
    return records
