"""Independent verification utilities.

Central finite differences, dense-grid global minimization and empirical
local convexity constants of a potential.
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ArgumentError, EmptyFeasibleError, StencilError
from .potentials import LegendrePotential

logger = logging.getLogger(__name__)

MAX_GRID_POINTS = 10 ** 7
TIE_TOL = 1e-12
REFINE_SHRINK = 10.0
CHUNK_ROWS = 65536


def finite_diff_gradient(fn: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central differences (fn(x + h e_i) - fn(x - h e_i)) / 2h."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        plus, minus = fn(x + step), fn(x - step)
        if not (np.isfinite(plus) and np.isfinite(minus)):
            raise StencilError("Infinite value on the finite-difference stencil",
                               coordinate=i, h=h, point=x)
        grad[i] = (plus - minus) / (2.0 * h)
    return grad


def finite_diff_jacobian(fn: Callable[[np.ndarray], np.ndarray], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector field (column i = d fn / d x_i)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    columns = []
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        plus = np.atleast_1d(fn(x + step))
        minus = np.atleast_1d(fn(x - step))
        if not (np.all(np.isfinite(plus)) and np.all(np.isfinite(minus))):
            raise StencilError("Infinite value on the finite-difference stencil", coordinate=i, h=h)
        columns.append((plus - minus) / (2.0 * h))
    return np.column_stack(columns)


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Tensor grid over a box, optionally refined around the best points."""
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    points: Tuple[int, ...]
    refine: int = 2
    # when set, the middle grid point sits exactly on this point
    anchor: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        points = tuple(int(v) for v in np.atleast_1d(self.points))
        if len(points) == 1 and len(lower) > 1:
            points = points * len(lower)
        if not (len(lower) == len(upper) == len(points)):
            raise ArgumentError("Grid bounds and point counts disagree in dimension")
        if not all(math.isfinite(v) for v in lower + upper):
            raise ArgumentError("Grid bounds must be finite", lower=lower, upper=upper)
        if any(lo >= hi for lo, hi in zip(lower, upper)):
            raise ArgumentError("Grid lower bounds must lie below upper bounds", lower=lower, upper=upper)
        if min(points) < 3:
            raise ArgumentError("Need at least 3 points per dimension", points=points)
        if math.prod(points) > MAX_GRID_POINTS:
            raise ArgumentError("Grid too large", size=math.prod(points), cap=MAX_GRID_POINTS)
        if self.refine < 0:
            raise ArgumentError("Refinement levels must be nonnegative", refine=self.refine)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "points", points)

    @classmethod
    def around(cls, center, half_width: float, points: int = 401, refine: int = 2) -> "GridSpec":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(tuple(center - half_width), tuple(center + half_width),
                   (points,) * center.size, refine)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def cell(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / (np.array(self.points) - 1)

    def axes(self) -> List[np.ndarray]:
        if self.anchor is None:
            return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.points)]
        axes = []
        for c, h, n in zip(self.anchor, self.cell, self.points):
            offsets = (np.arange(n) - (n - 1) // 2) * h
            axes.append(c + offsets)
        return axes

    def coordinates(self) -> np.ndarray:
        """All grid points as rows, last coordinate varying fastest."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def refined_around(self, center: np.ndarray) -> "GridSpec":
        """Grid of the same size, REFINE_SHRINK times narrower, with center on a grid point."""
        center = np.asarray(center, dtype=float)
        half = (np.array(self.upper) - np.array(self.lower)) / (2.0 * REFINE_SHRINK)
        points = tuple(n if n % 2 else n + 1 for n in self.points)
        return GridSpec(tuple(center - half), tuple(center + half), points, 0,
                        anchor=tuple(float(c) for c in center))


@dataclass
class GridResult:
    argmins: List[np.ndarray]
    min_value: float
    cell: np.ndarray
    on_boundary: bool = False
    evaluations: int = 0


def evaluate_grid(fn: Callable, grid: GridSpec, vectorized: bool = False,
                  max_workers: int = 1) -> Tuple[np.ndarray, np.ndarray]:
    """Grid coordinates and function values.

    Chunks are evaluated in a fixed order and stored by position, so the
    result does not depend on ``max_workers``.
    """
    Z = grid.coordinates()
    values = np.empty(len(Z))
    chunks = [slice(s, min(s + CHUNK_ROWS, len(Z))) for s in range(0, len(Z), CHUNK_ROWS)]

    def run(sl: slice) -> None:
        if vectorized:
            values[sl] = fn(Z[sl])
        else:
            values[sl] = [fn(z) for z in Z[sl]]

    if max_workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            list(pool.map(run, chunks))
    else:
        for sl in chunks:
            run(sl)
    values[np.isnan(values)] = np.inf
    return Z, values


def _ties(Z: np.ndarray, values: np.ndarray) -> Tuple[List[np.ndarray], float]:
    best = float(values.min())
    if not math.isfinite(best):
        return [], best
    idx = np.flatnonzero(values <= best + TIE_TOL)
    return [Z[i].copy() for i in idx], best


def grid_argmin(fn: Callable, grid: GridSpec, vectorized: bool = False,
                max_workers: int = 1) -> GridResult:
    """All grid points within TIE_TOL of the grid minimum, refined around each.

    Args:
        fn: Objective; takes an (N, d) array when ``vectorized``
        grid: Search grid
        vectorized: Evaluate all rows in one call
        max_workers: Threads for row-wise evaluation

    Returns:
        GridResult with every tied minimizer and the evaluation count

    Raises:
        EmptyFeasibleError: fn is infinite on every grid point
    """
    Z, values = evaluate_grid(fn, grid, vectorized, max_workers)
    evaluations = len(Z)
    if not np.any(np.isfinite(values)):
        raise EmptyFeasibleError("Objective is infinite on the whole grid",
                                 lower=grid.lower, upper=grid.upper)
    candidates, best = _ties(Z, values)
    lower, upper = np.array(grid.lower), np.array(grid.upper)
    on_boundary = any(np.any((c == lower) | (c == upper)) for c in candidates)

    cell = grid.cell
    current = grid
    for level in range(grid.refine):
        refined: List[Tuple[np.ndarray, float]] = []
        for c in candidates:
            sub = current.refined_around(c)
            Zs, vs = evaluate_grid(fn, sub, vectorized, max_workers)
            evaluations += len(Zs)
            points, value = _ties(Zs, vs)
            refined.extend((p, value) for p in points)
        if not refined:
            break
        best = min(v for _, v in refined)
        candidates = [p for p, v in refined if v <= best + TIE_TOL]
        current = current.refined_around(candidates[0])
        cell = current.cell

    argmins = _dedupe(candidates, 1.5 * float(np.max(cell)))
    logger.debug(f"Grid argmin: {len(argmins)} point(s), value {best:.6g}, {evaluations} evaluations")
    return GridResult(argmins, best, cell, on_boundary, evaluations)


def _dedupe(points: Sequence[np.ndarray], radius: float) -> List[np.ndarray]:
    kept: List[np.ndarray] = []
    for p in points:
        if all(np.max(np.abs(p - q)) > radius for q in kept):
            kept.append(p)
    return kept


@dataclass
class ConvexityEstimate:
    mu_hat: float
    gamma_hat: float
    samples: int

    @property
    def admissible(self) -> bool:
        return self.mu_hat > 0.0


def local_convexity_constants(p: LegendrePotential, K: Tuple[Sequence[float], Sequence[float]],
                              n_samples: int = 101) -> ConvexityEstimate:
    """Min/max Hessian eigenvalue over a tensor sample of the box K.

    The sample includes the box corners and, when it lies in K, the origin.

    Args:
        p: Potential
        K: (lower, upper) corners of a box inside dom p
        n_samples: Total sample budget, spread over the coordinates

    Returns:
        ConvexityEstimate with mu_hat and gamma_hat
    """
    lower = np.atleast_1d(np.asarray(K[0], dtype=float))
    upper = np.atleast_1d(np.asarray(K[1], dtype=float))
    if lower.shape != (p.dimension,) or upper.shape != (p.dimension,):
        raise ArgumentError("Box K must match the potential dimension", dimension=p.dimension)
    corners = np.array(list(itertools.product(*zip(lower, upper))))
    if not np.all(p.contains_rows(corners)):
        raise ArgumentError("Box K leaves the domain of the potential", potential=p.spec)

    per_dim = max(2, int(round(n_samples ** (1.0 / p.dimension))))
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    samples = np.column_stack([m.ravel() for m in mesh])
    if np.all((lower <= 0) & (upper >= 0)):
        samples = np.vstack([samples, np.zeros(p.dimension)])

    mu, gamma = math.inf, 0.0
    for w in samples:
        eig = np.linalg.eigvalsh(p.hessian(w))
        mu = min(mu, float(eig[0]))
        gamma = max(gamma, float(eig[-1]))
    if mu <= 0.0:
        logger.info(f"{p.spec} is not admissible on K: min Hessian eigenvalue {mu:.3g}")
    return ConvexityEstimate(max(mu, 0.0), gamma, len(samples))
