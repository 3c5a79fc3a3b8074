"""Step-halving line search that keeps iterates inside the open domain."""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import LineSearchError

logger = logging.getLogger(__name__)

MAX_HALVINGS = 50

# Relative slack on "does not increase": values that differ by rounding only
DESCENT_SLACK = 1e-13


@dataclass
class LineSearchResult:
    step: float
    point: np.ndarray
    value: float
    halvings: int


def no_increase(trial_value: float, reference: float) -> bool:
    """Finite and not larger than the reference up to rounding."""
    return bool(np.isfinite(trial_value)) and \
        trial_value <= reference + DESCENT_SLACK * (1.0 + abs(reference))


def backtrack_feasible(objective: Callable[[np.ndarray], float], x: np.ndarray,
                       direction: np.ndarray, step0: float,
                       max_halvings: int = MAX_HALVINGS,
                       reference: float = None) -> LineSearchResult:
    """Largest step in {step0 * 2^-k : k = 0..max_halvings} with a finite,
    non-increasing objective at x + step * direction.

    The first accepted step wins.
    """
    if reference is None:
        reference = objective(x)
    if not np.isfinite(reference):
        raise LineSearchError("Line search started from an infeasible point", value=reference)

    step = float(step0)
    for k in range(max_halvings + 1):
        trial = x + step * direction
        value = objective(trial)
        if no_increase(value, reference):
            if k:
                logger.debug(f"Line search accepted step {step:.3e} after {k} halvings")
            return LineSearchResult(step, trial, float(value), k)
        step *= 0.5

    raise LineSearchError("No feasible non-increasing step found",
                          step0=step0, halvings=max_halvings,
                          direction_norm=float(np.linalg.norm(direction)))
