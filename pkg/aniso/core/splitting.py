"""Splitting model F(u, z) = f(z) + (1/lambda) phi(Au - z) + g(u).

Stationarity residuals, the feasibility line search on either block and
deterministic alternating minimization.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (AnisoError, ArgumentError, DomainError, LineSearchError,
                     NonConvergenceError)
from .linesearch import LineSearchResult, backtrack_feasible
from .oracle import GridSpec
from .potentials import LegendrePotential
from .prox import ProxProblem, envelope_gradient, prox_grid, prox_local
from .records import ALT_MIN_COLUMNS, RunRecord

logger = logging.getLogger(__name__)

U_NEWTON_TOL = 1e-12
U_NEWTON_MAX_ITER = 100


class StackedIdentity:
    """A = [I, ..., I]^T with M copies of the n x n identity."""

    def __init__(self, n: int, copies: int):
        if n < 1 or copies < 1:
            raise ArgumentError("Stacked identity needs n >= 1 and M >= 1", n=n, M=copies)
        self.n = n
        self.copies = copies

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n * self.copies, self.n

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return np.tile(u, self.copies)

    def rmatvec(self, w: np.ndarray) -> np.ndarray:
        return w.reshape(self.copies, self.n).sum(axis=0)

    def dense(self) -> np.ndarray:
        return np.tile(np.eye(self.n), (self.copies, 1))


class DenseCoupling:
    """Arbitrary m x n coupling matrix."""

    def __init__(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if np.linalg.matrix_rank(matrix) < matrix.shape[1]:
            logger.warning("Coupling matrix does not have full column rank")
        self.matrix = matrix

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def matvec(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def rmatvec(self, w: np.ndarray) -> np.ndarray:
        return self.matrix.T @ w

    def dense(self) -> np.ndarray:
        return self.matrix


Coupling = Union[StackedIdentity, DenseCoupling]


@dataclass
class QuadraticTerm:
    """g(u) = 1/2 u^T G u + b^T u."""
    G: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.G.shape != (self.b.size, self.b.size):
            raise ArgumentError("G must be square and match b", G=self.G.shape, b=self.b.shape)

    def value(self, u: np.ndarray) -> float:
        return float(0.5 * u @ self.G @ u + self.b @ u)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return self.G @ u + self.b

    def hessian(self, u: np.ndarray) -> np.ndarray:
        return self.G


class BlockSum:
    """f(z) = sum_j f_j(z_j) over consecutive blocks of z."""

    def __init__(self, functions: Sequence):
        if not functions:
            raise ArgumentError("BlockSum needs at least one function")
        self.functions = list(functions)
        sizes = [fn.dimension for fn in self.functions]
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.slices = [slice(int(a), int(b)) for a, b in zip(offsets[:-1], offsets[1:])]
        self.dimension = int(offsets[-1])
        self.name = "+".join(getattr(fn, "name", "f") for fn in self.functions)

    @property
    def smooth(self) -> bool:
        return all(getattr(fn, "smooth", True) for fn in self.functions)

    @property
    def lower_bound(self) -> float:
        return float(sum(getattr(fn, "lower_bound", -math.inf) for fn in self.functions))

    def values(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return sum(fn.values(Z[:, sl]) for fn, sl in zip(self.functions, self.slices))

    def value(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(sum(fn.value(z[sl]) for fn, sl in zip(self.functions, self.slices)))

    def is_smooth_at(self, z) -> bool:
        z = np.asarray(z, dtype=float)
        return all(fn.is_smooth_at(z[sl]) for fn, sl in zip(self.functions, self.slices))

    def gradient(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.concatenate([fn.gradient(z[sl]) for fn, sl in zip(self.functions, self.slices)])

    def hessian(self, z) -> Optional[np.ndarray]:
        z = np.asarray(z, dtype=float)
        H = np.zeros((self.dimension, self.dimension))
        for fn, sl in zip(self.functions, self.slices):
            block = fn.hessian(z[sl])
            if block is None:
                return None
            H[sl, sl] = block
        return H


@dataclass
class SplittingProblem:
    f: object
    A: Coupling
    phi: LegendrePotential
    lam: float
    g: Optional[QuadraticTerm] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ArgumentError("lambda must be positive", lam=self.lam)
        if not isinstance(self.A, (StackedIdentity, DenseCoupling)):
            self.A = DenseCoupling(self.A)
        m, n = self.A.shape
        if self.f.dimension != m or self.phi.dimension != m:
            raise ArgumentError("f, phi and A disagree on the block dimension m",
                                f=self.f.dimension, phi=self.phi.dimension, m=m)
        if self.g is not None and self.g.b.size != n:
            raise ArgumentError("g does not act on R^n", n=n, g=self.g.b.size)

    @classmethod
    def distributed(cls, functions: Sequence, phi: LegendrePotential, lam: float) -> "SplittingProblem":
        """Consensus form: A stacks M identities, f = sum_j f_j(z_j)."""
        n = functions[0].dimension
        if any(fn.dimension != n for fn in functions):
            raise ArgumentError("All block functions must share one dimension")
        return cls(BlockSum(functions), StackedIdentity(n, len(functions)), phi, lam)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def g_value(self, u: np.ndarray) -> float:
        return 0.0 if self.g is None else self.g.value(u)

    def g_gradient(self, u: np.ndarray) -> np.ndarray:
        return np.zeros(self.n) if self.g is None else self.g.gradient(u)


@dataclass
class SplittingState:
    u: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float)).copy()
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float)).copy()

    @classmethod
    def consensus(cls, prob: SplittingProblem, u0) -> "SplittingState":
        """Start with z = A u0."""
        u0 = np.atleast_1d(np.asarray(u0, dtype=float))
        return cls(u0, prob.A.matvec(u0))


@dataclass
class StationarityResiduals:
    """Residuals of a splitting state; r_z is None where f has no gradient at z."""
    r_u: float
    r_z: Optional[float]
    envelope_residual: Optional[float] = None

    @property
    def known(self) -> List[float]:
        return [r for r in (self.r_u, self.r_z) if r is not None]

    @property
    def max_residual(self) -> float:
        """Largest of the residuals that could be evaluated."""
        return max(self.known)


def objective(prob: SplittingProblem, s: SplittingState) -> float:
    """F(u, z); +inf outside the domain."""
    coupling = prob.phi.value(prob.A.matvec(s.u) - s.z)
    if not math.isfinite(coupling):
        return math.inf
    value = prob.f.value(s.z)
    if not math.isfinite(value):
        return math.inf
    return value + coupling / prob.lam + prob.g_value(s.u)


def _coupling_gradient(prob: SplittingProblem, s: SplittingState) -> np.ndarray:
    w = prob.A.matvec(s.u) - s.z
    if not prob.phi.contains(w):
        raise DomainError("Au - z lies outside dom phi", u=s.u, z=s.z)
    return prob.phi.gradient(w)


def residuals(prob: SplittingProblem, s: SplittingState,
              envelope: Union[None, str, GridSpec] = None) -> StationarityResiduals:
    """Norms of the u- and z-stationarity conditions.

    ``envelope`` requests ||A^T grad e(Au) + grad g(u)|| as well: "local"
    computes the prox at Au by the local solver started at z, a GridSpec
    uses the grid oracle.

    Args:
        prob: Splitting problem
        s: State (u, z)
        envelope: None, "local" or a GridSpec

    Returns:
        StationarityResiduals; r_z is None where f has no gradient at z

    Raises:
        DomainError: Au - z lies outside dom phi
    """
    y = _coupling_gradient(prob, s) / prob.lam
    r_u = float(np.linalg.norm(prob.A.rmatvec(y) + prob.g_gradient(s.u)))
    r_z = None
    if prob.f.is_smooth_at(s.z):
        r_z = float(np.linalg.norm(prob.f.gradient(s.z) - y))

    envelope_residual = None
    if envelope is not None:
        envelope_residual = envelope_stationarity(prob, s, envelope)
    return StationarityResiduals(r_u, r_z, envelope_residual)


def envelope_stationarity(prob: SplittingProblem, s: SplittingState,
                          method: Union[str, GridSpec] = "local") -> float:
    v = prob.A.matvec(s.u)
    inner = ProxProblem(prob.f, prob.phi, prob.lam)
    if isinstance(method, GridSpec):
        z = prox_grid(inner, v, method).z
    elif method == "local":
        z = prox_local(inner, v, init=s.z).z
    else:
        raise ArgumentError(f"Unknown envelope method '{method}'")
    grad_e = envelope_gradient(inner, v, z)
    return float(np.linalg.norm(prob.A.rmatvec(grad_e) + prob.g_gradient(s.u)))


def feasibility_line_search(prob: SplittingProblem, s: SplittingState, direction: np.ndarray,
                            step0: float, block: str = "z") -> LineSearchResult:
    """Halve step0 until the updated block keeps F finite and not larger.

    Args:
        prob: Splitting problem
        s: Current state
        direction: Search direction for the block
        step0: Initial step
        block: "u" or "z"

    Returns:
        LineSearchResult with the accepted point, step, halvings and value

    Raises:
        LineSearchError: No acceptable step within the halving budget
    """
    if block == "u":
        fn = lambda u: objective(prob, SplittingState(u, s.z))
        start = s.u
    elif block == "z":
        fn = lambda z: objective(prob, SplittingState(s.u, z))
        start = s.z
    else:
        raise ArgumentError(f"Unknown block '{block}'")
    return backtrack_feasible(fn, start, np.asarray(direction, dtype=float), step0,
                              reference=objective(prob, s))


def u_gradient_step(prob: SplittingProblem, s: SplittingState, tau: float,
                    tau_includes_inv_lambda: bool = False) -> LineSearchResult:
    """u - tau * (c A^T grad phi(Au - z) + grad g(u)), c = 1/lambda.

    With ``tau_includes_inv_lambda`` the coupling gradient is taken with
    c = 1, so tau is the literal consensus step of the algorithm listing.
    """
    c = 1.0 if tau_includes_inv_lambda else 1.0 / prob.lam
    direction = -(c * prob.A.rmatvec(_coupling_gradient(prob, s)) + prob.g_gradient(s.u))
    return feasibility_line_search(prob, s, direction, tau, "u")


def u_exact(prob: SplittingProblem, s: SplittingState) -> np.ndarray:
    """argmin_u F(u, z).

    Closed form (mean of the blocks) for a stacked identity with g = 0 and
    a potential whose gradient is linear; damped Newton otherwise.
    """
    coefficient = prob.phi.linear_gradient_coefficient
    if isinstance(prob.A, StackedIdentity) and prob.g is None and coefficient is not None:
        return s.z.reshape(prob.A.copies, prob.A.n).mean(axis=0)

    A = prob.A.dense()
    fn = lambda u: objective(prob, SplittingState(u, s.z))
    u = s.u.copy()
    value = fn(u)
    for iteration in range(U_NEWTON_MAX_ITER):
        state = SplittingState(u, s.z)
        grad = prob.A.rmatvec(_coupling_gradient(prob, state)) / prob.lam + prob.g_gradient(u)
        if np.linalg.norm(grad) <= U_NEWTON_TOL * (1.0 + abs(value)):
            return u
        H = A.T @ prob.phi.hessian(A @ u - s.z) @ A / prob.lam
        if prob.g is not None:
            H = H + prob.g.hessian(u)
        try:
            direction = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            direction = -grad
        ls = backtrack_feasible(fn, u, direction, 1.0, reference=value)
        if np.array_equal(ls.point, u):
            return u
        u, value = ls.point, ls.value
    raise NonConvergenceError("Exact u-minimization did not converge",
                              iteration=U_NEWTON_MAX_ITER, u=u)


def u_median(z_blocks) -> np.ndarray:
    """Componentwise lower median of the blocks (rows)."""
    Z = np.atleast_2d(np.asarray(z_blocks, dtype=float))
    return np.sort(Z, axis=0)[(Z.shape[0] - 1) // 2].copy()


def z_gradient_step(prob: SplittingProblem, s: SplittingState, sigma: float) -> LineSearchResult:
    """z - sigma * (grad f(z) - (1/lambda) grad phi(Au - z))."""
    if not prob.f.is_smooth_at(s.z):
        raise ArgumentError("z-step needs f smooth at z", z=s.z)
    direction = -(prob.f.gradient(s.z) - _coupling_gradient(prob, s) / prob.lam)
    return feasibility_line_search(prob, s, direction, sigma, "z")


@dataclass
class AltMinOptions:
    tau: float = 0.05
    sigma: float = 0.05
    tol: float = 1e-8
    max_iter: int = 10000
    exact_u: bool = False
    tau_includes_inv_lambda: bool = False
    # 0: envelope residual only on the final iterate
    envelope_every: int = 0
    envelope_method: Union[str, GridSpec] = "local"

    def __post_init__(self):
        if not (self.tau > 0 and self.sigma > 0):
            raise ArgumentError("Step sizes must be positive", tau=self.tau, sigma=self.sigma)
        if self.tol <= 0 or self.max_iter < 1:
            raise ArgumentError("Need tol > 0 and max_iter >= 1", tol=self.tol, max_iter=self.max_iter)


def alternate_min(prob: SplittingProblem, opts: AltMinOptions,
                  initial: Union[SplittingState, Sequence[float], np.ndarray]
                  ) -> Tuple[SplittingState, RunRecord]:
    """u-step then z-step until max(r_u, r_z) <= tol or max_iter rounds.

    Args:
        prob: Splitting problem
        opts: Step sizes, tolerance and envelope cadence
        initial: Starting state, or u0 for the consensus state z = Au0

    Returns:
        Tuple of (final state, per-iteration RunRecord)
    """
    s = initial if isinstance(initial, SplittingState) else SplittingState.consensus(prob, initial)
    F = objective(prob, s)
    if not math.isfinite(F):
        raise ArgumentError("Initial state is infeasible", u=s.u, z=s.z)

    record = RunRecord(ALT_MIN_COLUMNS)
    res = residuals(prob, s, _envelope_for(opts, 0))
    record.append(iter=0, F=F, r_u=res.r_u, r_z=res.r_z, envelope_residual=res.envelope_residual)

    iteration = 0
    while res.max_residual > opts.tol and iteration < opts.max_iter:
        iteration += 1
        try:
            if opts.exact_u:
                step_u = None
                s = SplittingState(u_exact(prob, s), s.z)
            else:
                ls = u_gradient_step(prob, s, opts.tau, opts.tau_includes_inv_lambda)
                step_u = ls.step
                s = SplittingState(ls.point, s.z)
            ls = z_gradient_step(prob, s, opts.sigma)
            s = SplittingState(s.u, ls.point)
        except LineSearchError as e:
            raise LineSearchError(e.message, iteration=iteration, u=s.u, z=s.z, **e.context) from e

        F = objective(prob, s)
        res = residuals(prob, s, _envelope_for(opts, iteration))
        record.append(iter=iteration, F=F, r_u=res.r_u, r_z=res.r_z,
                      envelope_residual=res.envelope_residual, step_u=step_u, step_z=ls.step)

    if record.rows[-1]["envelope_residual"] is None and (
            prob.f.smooth or isinstance(opts.envelope_method, GridSpec)):
        try:
            record.rows[-1]["envelope_residual"] = envelope_stationarity(prob, s, opts.envelope_method)
        except AnisoError as e:
            logger.warning(f"Envelope residual not available at the final iterate: {e}")

    if res.max_residual > opts.tol:
        logger.warning(f"alternate_min stopped at max_iter={opts.max_iter} "
                       f"with residual {res.max_residual:.3e}")
    else:
        logger.info(f"alternate_min converged after {iteration} iterations, F={F:.10g}")
    return s, record


def _envelope_for(opts: AltMinOptions, iteration: int):
    if opts.envelope_every and iteration % opts.envelope_every == 0:
        return opts.envelope_method
    return None
