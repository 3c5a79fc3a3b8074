"""phi-proximal mapping, phi-envelope and the envelope gradient formula.

For a function f, a Legendre potential phi and lambda > 0:

    e(v) = inf_z f(z) + (1/lambda) * phi(v - z)
    P(v) = argmin of the same problem
    grad e(v) = (1/lambda) * grad phi(v - z),  z in P(v) locally unique
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import (ArgumentError, DomainError, EmptyFeasibleError,
                     InversionError, LineSearchError, NonConvergenceError)
from .linesearch import backtrack_feasible
from .oracle import GridSpec, finite_diff_jacobian, grid_argmin
from .potentials import LegendrePotential

logger = logging.getLogger(__name__)

LOCAL_TOL = 1e-10
LOCAL_MAX_ITER = 10 ** 4
IDENTITY_TOL = 1e-13
IDENTITY_MAX_ITER = 50
UNBOUNDED_EXPANSIONS = 3


@dataclass
class ProxProblem:
    """f, phi and lambda of an envelope e_lambda^phi f."""
    f: object
    phi: LegendrePotential
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ArgumentError("lambda must be positive", lam=self.lam)
        if self.f.dimension != self.phi.dimension:
            raise ArgumentError("f and phi act on different dimensions",
                                f=self.f.dimension, phi=self.phi.dimension)

    @property
    def dimension(self) -> int:
        return self.phi.dimension

    @property
    def threshold_unknown(self) -> bool:
        """No lower bound on f, so the prox-boundedness threshold is not known."""
        return not getattr(self.f, "lower_bound", -math.inf) > -math.inf

    def inner(self, v: np.ndarray, z: np.ndarray) -> float:
        """f(z) + (1/lambda) * phi(v - z)."""
        coupling = self.phi.value(v - z)
        if not math.isfinite(coupling):
            return math.inf
        return self.f.value(z) + coupling / self.lam

    def inner_rows(self, v: np.ndarray, Z: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.f.values(Z) + self.phi.values(v[None, :] - Z) / self.lam

    def inner_gradient(self, v: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.f.gradient(z) - self.phi.gradient(v - z) / self.lam

    def _vector(self, x, name: str) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dimension,):
            raise ArgumentError(f"{name} must have length {self.dimension}", shape=x.shape)
        return x


@dataclass
class ProxResult:
    minimizers: List[np.ndarray]
    envelope: float
    envelope_gradient: Optional[np.ndarray] = None
    multivalued: bool = False
    method: str = "grid_oracle"
    iterations: int = 0

    @property
    def z(self) -> np.ndarray:
        """The (first) minimizer."""
        return self.minimizers[0]


def prox_grid(prob: ProxProblem, v, grid: GridSpec, max_workers: int = 1) -> ProxResult:
    """Global prox by the dense-grid oracle (dimension <= 3).

    Args:
        prob: Prox problem (f, phi, lambda)
        v: Point at which to evaluate the prox
        grid: Search grid of the problem dimension
        max_workers: Threads for the grid evaluation

    Returns:
        ProxResult; ``multivalued`` is set and the envelope gradient is None
        when several grid points tie for the minimum

    Raises:
        ArgumentError: Grid and problem dimensions disagree or exceed 3
        EmptyFeasibleError: The inner objective is infinite on the whole grid
    """
    v = prob._vector(v, "v")
    if grid.dimension != prob.dimension or prob.dimension > 3:
        raise ArgumentError("Grid oracle needs a grid of the problem dimension (at most 3)",
                            grid=grid.dimension, problem=prob.dimension)
    try:
        result = grid_argmin(lambda Z: prob.inner_rows(v, Z), grid,
                             vectorized=True, max_workers=max_workers)
    except EmptyFeasibleError as e:
        raise EmptyFeasibleError("v lies outside dom f + dom phi on this grid", v=v) from e

    minimizers = result.argmins
    envelope = min(prob.inner(v, z) for z in minimizers)
    gradient = None
    if len(minimizers) == 1:
        gradient = prob.phi.gradient(v - minimizers[0]) / prob.lam
    return ProxResult(minimizers, envelope, gradient, len(minimizers) > 1, "grid_oracle")


def prox_local(prob: ProxProblem, v, init=None, tol: float = LOCAL_TOL,
               max_iter: int = LOCAL_MAX_ITER) -> ProxResult:
    """Local prox by descent on z -> f(z) + (1/lambda) phi(v - z).

    Uses a Newton direction when the inner Hessian is positive definite and
    the negative gradient otherwise; both go through the feasibility line
    search. Starts at z = v unless ``init`` is given.

    Args:
        prob: Prox problem with a smooth f
        v: Point at which to evaluate the prox
        init: Starting z
        tol: Tolerance on the inner gradient norm
        max_iter: Iteration cap

    Returns:
        ProxResult holding one local minimizer

    Raises:
        ArgumentError: f is nonsmooth or v - init is outside dom phi
        NonConvergenceError: Line search failed, stalled or hit the cap
    """
    v = prob._vector(v, "v")
    if not getattr(prob.f, "smooth", True):
        raise ArgumentError("prox_local needs a smooth f; use prox_grid", f=getattr(prob.f, "name", "f"))
    z = v.copy() if init is None else prob._vector(init, "init")
    if not prob.phi.contains(v - z):
        raise ArgumentError("Initial point is infeasible: v - init outside dom phi", init=z)

    objective = lambda x: prob.inner(v, x)
    value = objective(z)
    gradient_step = 1.0

    for iteration in range(max_iter):
        grad = prob.inner_gradient(v, z)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break

        direction = _newton_direction(prob, v, z, grad)
        newton = direction is not None
        if not newton:
            direction = -grad
        step0 = 1.0 if newton else gradient_step
        try:
            ls = backtrack_feasible(objective, z, direction, step0, reference=value)
        except LineSearchError as e:
            raise NonConvergenceError("prox_local line search failed", iteration=iteration,
                                      gradient_norm=gnorm, z=z) from e
        if not newton:
            gradient_step = min(2.0 * ls.step, 1e6)
        if np.array_equal(ls.point, z):
            # rounding floor: no representable progress left
            if gnorm <= 1e3 * tol:
                break
            raise NonConvergenceError("prox_local stalled", iteration=iteration, gradient_norm=gnorm, z=z)
        z, value = ls.point, ls.value
    else:
        gnorm = float(np.linalg.norm(prob.inner_gradient(v, z)))
        if gnorm > tol:
            raise NonConvergenceError("prox_local hit its iteration cap",
                                      iteration=max_iter, gradient_norm=gnorm, z=z)
        iteration = max_iter

    logger.debug(f"prox_local converged in {iteration} iterations")
    gradient = prob.phi.gradient(v - z) / prob.lam
    return ProxResult([z], value, gradient, False, "local_newton", iteration)


def _newton_direction(prob: ProxProblem, v: np.ndarray, z: np.ndarray,
                      grad: np.ndarray) -> Optional[np.ndarray]:
    hess_f = prob.f.hessian(z) if hasattr(prob.f, "hessian") else None
    if hess_f is None:
        return None
    H = hess_f + prob.phi.hessian(v - z) / prob.lam
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return None
    return -np.linalg.solve(L.T, np.linalg.solve(L, grad))


def envelope_gradient(prob: ProxProblem, v, z) -> np.ndarray:
    """(1/lambda) * grad phi(v - z).

    Args:
        prob: Prox problem
        v: Envelope argument
        z: A prox point of v

    Returns:
        Gradient of the envelope at v

    Raises:
        DomainError: v - z lies outside dom phi
    """
    v = prob._vector(v, "v")
    z = prob._vector(z, "z")
    if not prob.phi.contains(v - z):
        raise DomainError("v - z lies outside dom phi", v=v, z=z)
    return prob.phi.gradient(v - z) / prob.lam


GridOrInit = Union[GridSpec, np.ndarray, Sequence[float], None]


def compute_prox(prob: ProxProblem, v, grid_or_init: GridOrInit = None) -> ProxResult:
    """Grid oracle for a GridSpec, local solver otherwise (None starts at v)."""
    if isinstance(grid_or_init, GridSpec):
        return prox_grid(prob, v, grid_or_init)
    return prox_local(prob, v, grid_or_init)


def stationarity_measure(prob: ProxProblem, u, grid_or_init: GridOrInit = None) -> float:
    """||grad e(u)|| computed through the prox at u."""
    result = compute_prox(prob, u, grid_or_init)
    if result.multivalued:
        logger.warning("Prox is multivalued at u; envelope gradient taken at the first minimizer")
    gradient = result.envelope_gradient
    if gradient is None:
        gradient = envelope_gradient(prob, u, result.z)
    return float(np.linalg.norm(gradient))


def envelope_sum_gradient(problems: Sequence[ProxProblem], u,
                          grid_or_init: GridOrInit = None) -> np.ndarray:
    """sum_j grad e_j(u) for a family of envelopes sharing the point u."""
    total = None
    for prob in problems:
        result = compute_prox(prob, u, grid_or_init)
        gradient = envelope_gradient(prob, u, result.z)
        total = gradient if total is None else total + gradient
    return total


def prox_identity_residual(prob: ProxProblem, v) -> float:
    """||z_identity - z_prox|| where z_identity solves z + grad phi*(lambda grad f(z)) = v.

    Newton on the identity, started from the prox_local solution.
    """
    v = prob._vector(v, "v")
    z_prox = prox_local(prob, v).z
    phi, lam = prob.phi, prob.lam

    def residual(z):
        return z + phi.conjugate_gradient(lam * prob.f.gradient(z)) - v

    def jacobian(z):
        hess_f = prob.f.hessian(z) if hasattr(prob.f, "hessian") else None
        if hess_f is None:
            return finite_diff_jacobian(residual, z)
        w = phi.conjugate_gradient(lam * prob.f.gradient(z))
        # d/dz grad phi*(y) = [hess phi(w)]^-1 dy/dz
        return np.eye(prob.dimension) + np.linalg.solve(phi.hessian(w), lam * hess_f)

    z = z_prox.copy()
    r = residual(z)
    for iteration in range(IDENTITY_MAX_ITER):
        if np.linalg.norm(r) <= IDENTITY_TOL * (1.0 + np.linalg.norm(v)):
            break
        try:
            step = np.linalg.solve(jacobian(z), r)
        except np.linalg.LinAlgError as e:
            raise InversionError("Singular Jacobian in the prox identity", iteration=iteration, z=z) from e
        z_next = z - step
        r_next = residual(z_next)
        if np.linalg.norm(r_next) >= np.linalg.norm(r):
            break
        z, r = z_next, r_next
    else:
        raise InversionError("Prox identity Newton did not converge",
                             iteration=IDENTITY_MAX_ITER, residual=float(np.linalg.norm(r)))

    if np.linalg.norm(r) > 1e-8 * (1.0 + np.linalg.norm(v)):
        raise InversionError("Prox identity residual stayed large",
                             residual=float(np.linalg.norm(r)), z=z)
    return float(np.linalg.norm(z - z_prox))


def prox_bound_certificate(prob: ProxProblem, v_bar, eps: float, grid: GridSpec,
                           n_points: int = 11) -> float:
    """Empirical lower bound beta_hat of the envelope on the ball B(v_bar, eps).

    Returns -inf when the grid minimum keeps decreasing on the grid boundary
    as the grid is enlarged (evidence that the envelope is unbounded below).

    Args:
        prob: Prox problem
        v_bar: Ball center
        eps: Ball radius
        grid: Grid for the prox at each sample point
        n_points: Samples per coordinate of the ball's bounding box

    Returns:
        beta_hat, or -inf

    Raises:
        EmptyFeasibleError: The envelope is +inf at every sampled point
    """
    v_bar = prob._vector(v_bar, "v_bar")
    if eps <= 0:
        raise ArgumentError("eps must be positive", eps=eps)
    axes = [np.linspace(c - eps, c + eps, n_points) for c in v_bar]
    mesh = np.meshgrid(*axes, indexing="ij")
    candidates = np.column_stack([m.ravel() for m in mesh])
    ball = candidates[np.linalg.norm(candidates - v_bar, axis=1) <= eps * (1 + 1e-12)]

    beta_hat = math.inf
    feasible = 0
    for v in ball:
        try:
            value = _envelope_with_expansion(prob, v, grid)
        except EmptyFeasibleError:
            continue
        feasible += 1
        beta_hat = min(beta_hat, value)
        if beta_hat == -math.inf:
            break
    if feasible == 0:
        raise EmptyFeasibleError("Envelope is +inf at every sampled v; no evidence of a bound",
                                 v_bar=v_bar, eps=eps)
    return beta_hat


def _envelope_with_expansion(prob: ProxProblem, v: np.ndarray, grid: GridSpec) -> float:
    """Grid envelope at v; -inf when the minimum runs off an enlarging grid."""
    current = grid
    previous = None
    for _ in range(UNBOUNDED_EXPANSIONS + 1):
        result = grid_argmin(lambda Z: prob.inner_rows(v, Z), current, vectorized=True)
        if not result.on_boundary:
            return result.min_value
        if previous is not None and result.min_value >= previous:
            return result.min_value
        previous = result.min_value
        center = (np.array(current.lower) + np.array(current.upper)) / 2.0
        half = np.array(current.upper) - center
        current = GridSpec(tuple(center - 2 * half), tuple(center + 2 * half), current.points, current.refine)
    logger.info(f"Envelope at v={v} decreases without saturation under grid enlargement")
    return -math.inf
