"""Legendre potentials phi, their calculus and assumption checks.

Every potential acts on vectors of a fixed dimension m.  Row-wise
``values``/``gradients`` accept an (N, m) array and are what the grid oracle
uses; ``value``/``gradient``/``hessian`` are the single-point entry points.
Points outside the open domain have value ``+inf``; gradients and Hessians
raise :class:`DomainError` there.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ArgumentError, DomainError, InversionError

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2.0

# Newton inversion of the gradient map
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 200
NEWTON_MAX_HALVINGS = 60


class PotentialKind(Enum):
    """Kinds of potentials, named as in config strings."""
    QUAD = "quad"
    SCALED_QUAD = "scaled-quad"
    CUBIC = "cubic"
    TAN = "tan"
    TAN_SEP = "tan-sep"
    LOG = "log"
    LOG_SEP = "log-sep"
    COMPOSITE = "composite"

    @classmethod
    def parse(cls, name: str) -> "PotentialKind":
        normalized = name.strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == normalized:
                return kind
        raise ArgumentError(f"Unknown potential kind: {name}",
                            supported=[k.value for k in cls if k is not cls.COMPOSITE])


# Kinds evaluated in the comparison experiments
TABLE_KINDS = (
    PotentialKind.QUAD,
    PotentialKind.CUBIC,
    PotentialKind.TAN,
    PotentialKind.TAN_SEP,
    PotentialKind.LOG,
    PotentialKind.LOG_SEP,
)


class LegendrePotential(ABC):
    """Base class for potentials phi with phi(0) = 0 and grad phi(0) = 0."""

    kind: PotentialKind
    dimension: int

    @property
    def domain_radius(self) -> float:
        """Euclidean (ball) or per-coordinate (box) bound of dom phi."""
        return math.inf

    @property
    def box_domain(self) -> bool:
        """True when the domain bound applies per coordinate."""
        return False

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.domain_radius)

    def contains_rows(self, W: np.ndarray) -> np.ndarray:
        """Domain membership of each row of W."""
        return np.ones(W.shape[0], dtype=bool)

    def contains(self, w) -> bool:
        w = self._as_vector(w)
        return bool(self.contains_rows(w[None, :])[0])

    def domain_scale(self, d) -> float:
        """Largest t such that t*d is still on the closure of dom phi."""
        d = self._as_vector(d)
        if not self.bounded:
            return math.inf
        size = np.max(np.abs(d)) if self.box_domain else np.linalg.norm(d)
        if size == 0.0:
            return math.inf
        return self.domain_radius / size

    @abstractmethod
    def _values(self, W: np.ndarray) -> np.ndarray:
        """Values of in-domain rows."""

    @abstractmethod
    def _gradients(self, W: np.ndarray) -> np.ndarray:
        """Gradients of in-domain rows."""

    @abstractmethod
    def _hessian(self, w: np.ndarray) -> np.ndarray:
        """Hessian at one in-domain point."""

    def values(self, W) -> np.ndarray:
        W = self._as_rows(W)
        out = np.full(W.shape[0], np.inf)
        inside = self.contains_rows(W)
        if np.any(inside):
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                vals = self._values(W[inside])
            # rounding right at the boundary may overflow; never report NaN
            out[inside] = np.where(np.isnan(vals), np.inf, vals)
        return out

    def value(self, w) -> float:
        w = self._as_vector(w)
        return float(self.values(w[None, :])[0])

    def gradients(self, W) -> np.ndarray:
        W = self._as_rows(W)
        inside = self.contains_rows(W)
        if not np.all(inside):
            bad = W[np.argmin(inside)]
            raise DomainError(f"Point outside dom {self.spec}", **self._where(bad))
        return self._gradients(W)

    def gradient(self, w) -> np.ndarray:
        w = self._as_vector(w)
        return self.gradients(w[None, :])[0]

    def hessian(self, w) -> np.ndarray:
        w = self._as_vector(w)
        if not self.contains(w):
            raise DomainError(f"Point outside dom {self.spec}", **self._where(w))
        return self._hessian(w)

    def is_admissible_at(self, w) -> bool:
        """Whether the Hessian at w is positive definite."""
        return bool(np.linalg.eigvalsh(self.hessian(w)).min() > 0.0)

    @property
    def linear_gradient_coefficient(self) -> Optional[float]:
        """c when grad phi(w) = c*w for all w (isotropic quadratics), else None."""
        return None

    def conjugate_gradient(self, y, tol: float = NEWTON_TOL,
                           max_iter: int = NEWTON_MAX_ITER) -> np.ndarray:
        """Solve grad phi(w) = y, i.e. evaluate grad phi*(y).

        Damped Newton from w = 0 with step halving on the residual norm.

        Args:
            y: Point in the range of grad phi
            tol: Absolute tolerance on ||grad phi(w) - y||
            max_iter: Newton iteration cap

        Returns:
            w with grad phi(w) = y

        Raises:
            InversionError: Newton stalled or hit the cap above ``tol``
        """
        y = self._as_vector(y)
        w = np.zeros(self.dimension)
        r = self._gradients(w[None, :])[0] - y
        res = float(np.linalg.norm(r))

        for iteration in range(max_iter):
            if res <= tol:
                return w
            H = self._hessian(w)
            try:
                step = np.linalg.solve(H, r)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, r, rcond=None)[0]

            t = 1.0
            accepted = False
            for _ in range(NEWTON_MAX_HALVINGS):
                trial = w - t * step
                if self.contains(trial):
                    r_trial = self._gradients(trial[None, :])[0] - y
                    res_trial = float(np.linalg.norm(r_trial))
                    if res_trial < res:
                        accepted = True
                        break
                t *= 0.5

            if not accepted:
                raise InversionError("Newton inversion of grad phi stalled",
                                     iteration=iteration, residual=res, potential=self.spec)
            w, r, res = trial, r_trial, res_trial

        if res <= tol:
            return w
        raise InversionError("Newton inversion of grad phi did not converge",
                             iteration=max_iter, residual=res, potential=self.spec)

    def bregman(self, w_prime, w) -> float:
        """Bregman distance phi(w') - phi(w) - <grad phi(w), w' - w>."""
        w_prime = self._as_vector(w_prime)
        w = self._as_vector(w)
        if not self.contains(w) or not self.contains(w_prime):
            return math.inf
        d = self.value(w_prime) - self.value(w) - float(self.gradient(w) @ (w_prime - w))
        return max(d, 0.0)

    def with_dimension(self, dimension: int) -> "LegendrePotential":
        """Same kind and parameters acting on a different dimension."""
        return replace(self, dimension=dimension)

    @property
    def spec(self) -> str:
        return self.kind.value

    def _as_vector(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.ndim == 0:
            w = w.reshape(1)
        if w.shape != (self.dimension,):
            raise ArgumentError(f"Expected a vector of length {self.dimension}",
                                shape=w.shape, potential=self.spec)
        return w

    def _as_rows(self, W) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        if W.ndim == 1 and self.dimension == 1:
            W = W[:, None]
        if W.ndim != 2 or W.shape[1] != self.dimension:
            raise ArgumentError(f"Expected rows of length {self.dimension}",
                                shape=W.shape, potential=self.spec)
        return W

    def _where(self, w: np.ndarray) -> Dict[str, float]:
        if self.box_domain:
            i = int(np.argmax(np.abs(w)))
            return {"coordinate": i, "value": float(w[i]), "bound": self.domain_radius}
        return {"norm": float(np.linalg.norm(w)), "bound": self.domain_radius}

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.spec}, dimension={self.dimension})"


def _check_dimension(dimension: int) -> None:
    if not isinstance(dimension, (int, np.integer)) or dimension < 1:
        raise ArgumentError("Potential dimension must be a positive integer", dimension=dimension)


@dataclass(frozen=True, eq=False, repr=False)
class QuadPotential(LegendrePotential):
    """(scale/2)*||w||^2; scale=2 gives the plain squared norm."""
    dimension: int
    scale: float = 1.0
    kind: PotentialKind = field(default=PotentialKind.QUAD, init=False)

    def __post_init__(self):
        _check_dimension(self.dimension)
        if self.scale <= 0:
            raise ArgumentError("Quadratic scale must be positive", scale=self.scale)

    def _values(self, W):
        return 0.5 * self.scale * np.sum(W * W, axis=1)

    def _gradients(self, W):
        return self.scale * W

    def _hessian(self, w):
        return self.scale * np.eye(self.dimension)

    def conjugate_gradient(self, y, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        return self._as_vector(y) / self.scale

    @property
    def linear_gradient_coefficient(self):
        return self.scale

    @property
    def spec(self):
        return "quad" if self.scale == 1.0 else f"quad:scale={self.scale!r}"


@dataclass(frozen=True, eq=False, repr=False)
class ScaledQuadPotential(LegendrePotential):
    """w^T Q w with Q symmetric positive definite (Q = q*I unless matrix given)."""
    dimension: int
    q: float = 1.0
    matrix: Optional[np.ndarray] = None
    kind: PotentialKind = field(default=PotentialKind.SCALED_QUAD, init=False)

    def __post_init__(self):
        _check_dimension(self.dimension)
        Q = self.q * np.eye(self.dimension) if self.matrix is None else np.asarray(self.matrix, float)
        if Q.shape != (self.dimension, self.dimension) or not np.allclose(Q, Q.T):
            raise ArgumentError("Q must be a symmetric matrix", shape=Q.shape)
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise ArgumentError("Q must be positive definite")
        object.__setattr__(self, "matrix", Q)

    def _values(self, W):
        return np.einsum("ni,ij,nj->n", W, self.matrix, W)

    def _gradients(self, W):
        return 2.0 * W @ self.matrix

    def _hessian(self, w):
        return 2.0 * self.matrix

    def conjugate_gradient(self, y, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        return np.linalg.solve(2.0 * self.matrix, self._as_vector(y))

    def with_dimension(self, dimension):
        if not np.array_equal(self.matrix, self.q * np.eye(self.dimension)):
            raise ArgumentError("A custom Q matrix cannot be resized", dimension=dimension)
        return ScaledQuadPotential(dimension, q=self.q)

    @property
    def spec(self):
        return f"scaled-quad:q={self.q!r}"


@dataclass(frozen=True, eq=False, repr=False)
class CubicPotential(LegendrePotential):
    """sum_i |w_i|^3 + (epsilon_quad/2)*||w||^2.

    With epsilon_quad = 0 the Hessian vanishes at the origin, so the
    potential is not admissible there.
    """
    dimension: int
    epsilon_quad: float = 0.0
    kind: PotentialKind = field(default=PotentialKind.CUBIC, init=False)

    def __post_init__(self):
        _check_dimension(self.dimension)
        if self.epsilon_quad < 0:
            raise ArgumentError("epsilon_quad must be nonnegative", eps=self.epsilon_quad)

    def _values(self, W):
        return np.sum(np.abs(W) ** 3, axis=1) + 0.5 * self.epsilon_quad * np.sum(W * W, axis=1)

    def _gradients(self, W):
        return 3.0 * np.abs(W) * W + self.epsilon_quad * W

    def _hessian(self, w):
        return np.diag(6.0 * np.abs(w) + self.epsilon_quad)

    def conjugate_gradient(self, y, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        # per coordinate: 3|w|w + eps*w = y
        y = self._as_vector(y)
        eps = self.epsilon_quad
        denom = eps + np.sqrt(eps * eps + 12.0 * np.abs(y))
        out = np.zeros_like(y)
        nz = denom > 0
        out[nz] = 2.0 * y[nz] / denom[nz]
        return out

    @property
    def spec(self):
        return "cubic" if self.epsilon_quad == 0 else f"cubic:eps={self.epsilon_quad!r}"


@dataclass(frozen=True, eq=False, repr=False)
class TanPotential(LegendrePotential):
    """tan(||w||^2) on {||w||^2 < pi/2}."""
    dimension: int
    kind: PotentialKind = field(default=PotentialKind.TAN, init=False)

    def __post_init__(self):
        _check_dimension(self.dimension)

    @property
    def domain_radius(self):
        return math.sqrt(HALF_PI)

    def contains_rows(self, W):
        return np.sum(W * W, axis=1) < HALF_PI

    def _values(self, W):
        return np.tan(np.sum(W * W, axis=1))

    def _gradients(self, W):
        t = np.tan(np.sum(W * W, axis=1))
        return (2.0 * (1.0 + t * t))[:, None] * W

    def _hessian(self, w):
        t = math.tan(float(w @ w))
        sec2 = 1.0 + t * t
        return 2.0 * sec2 * np.eye(self.dimension) + 8.0 * sec2 * t * np.outer(w, w)


@dataclass(frozen=True, eq=False, repr=False)
class TanSepPotential(LegendrePotential):
    """sum_i tan(w_i^2) on {|w_i| < sqrt(pi/2)}."""
    dimension: int
    kind: PotentialKind = field(default=PotentialKind.TAN_SEP, init=False)

    def __post_init__(self):
        _check_dimension(self.dimension)

    @property
    def domain_radius(self):
        return math.sqrt(HALF_PI)

    @property
    def box_domain(self):
        return True

    def contains_rows(self, W):
        return np.all(W * W < HALF_PI, axis=1)

    def _values(self, W):
        return np.sum(np.tan(W * W), axis=1)

    def _gradients(self, W):
        t = np.tan(W * W)
        return 2.0 * (1.0 + t * t) * W

    def _hessian(self, w):
        t = np.tan(w * w)
        sec2 = 1.0 + t * t
        return np.diag(2.0 * sec2 + 8.0 * w * w * sec2 * t)


@dataclass(frozen=True, eq=False, repr=False)
class LogPotential(LegendrePotential):
    """-log(1 - ||w||^2) on the open unit ball."""
    dimension: int
    kind: PotentialKind = field(default=PotentialKind.LOG, init=False)

    def __post_init__(self):
        _check_dimension(self.dimension)

    @property
    def domain_radius(self):
        return 1.0

    def contains_rows(self, W):
        return np.sum(W * W, axis=1) < 1.0

    def _values(self, W):
        return -np.log1p(-np.sum(W * W, axis=1))

    def _gradients(self, W):
        return (2.0 / (1.0 - np.sum(W * W, axis=1)))[:, None] * W

    def _hessian(self, w):
        gap = 1.0 - float(w @ w)
        return (2.0 / gap) * np.eye(self.dimension) + (4.0 / gap ** 2) * np.outer(w, w)


@dataclass(frozen=True, eq=False, repr=False)
class LogSepPotential(LegendrePotential):
    """sum_i -log(1 - w_i^2) on the open unit box."""
    dimension: int
    kind: PotentialKind = field(default=PotentialKind.LOG_SEP, init=False)

    def __post_init__(self):
        _check_dimension(self.dimension)

    @property
    def domain_radius(self):
        return 1.0

    @property
    def box_domain(self):
        return True

    def contains_rows(self, W):
        return np.all(W * W < 1.0, axis=1)

    def _values(self, W):
        return -np.sum(np.log1p(-W * W), axis=1)

    def _gradients(self, W):
        return 2.0 * W / (1.0 - W * W)

    def _hessian(self, w):
        gap = 1.0 - w * w
        return np.diag(2.0 * (1.0 + w * w) / gap ** 2)


class CompositePotential(LegendrePotential):
    """Block sum phi(w) = sum_l phi_l(w_l / eta) over consecutive blocks."""

    kind = PotentialKind.COMPOSITE

    def __init__(self, blocks: Sequence[LegendrePotential], eta: float = 1.0):
        if not blocks:
            raise ArgumentError("Composite potential needs at least one block")
        if not eta > 0:
            raise ArgumentError("Scaling eta must be positive", eta=eta)
        self.blocks: Tuple[LegendrePotential, ...] = tuple(blocks)
        self.eta = float(eta)
        sizes = [b.dimension for b in self.blocks]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        self.dimension = int(self.offsets[-1])

    def _slices(self):
        for block, start, stop in zip(self.blocks, self.offsets[:-1], self.offsets[1:]):
            yield block, slice(int(start), int(stop))

    @property
    def bounded(self):
        return any(b.bounded for b in self.blocks)

    @property
    def domain_radius(self):
        return min(b.domain_radius for b in self.blocks) * self.eta

    def contains_rows(self, W):
        inside = np.ones(W.shape[0], dtype=bool)
        for block, sl in self._slices():
            inside &= block.contains_rows(W[:, sl] / self.eta)
        return inside

    def domain_scale(self, d):
        d = self._as_vector(d)
        scales = [block.domain_scale(d[sl] / self.eta) for block, sl in self._slices()]
        return min(scales)

    def _values(self, W):
        total = np.zeros(W.shape[0])
        for block, sl in self._slices():
            total += block._values(W[:, sl] / self.eta)
        return total

    def _gradients(self, W):
        out = np.empty_like(W)
        for block, sl in self._slices():
            out[:, sl] = block._gradients(W[:, sl] / self.eta) / self.eta
        return out

    def _hessian(self, w):
        H = np.zeros((self.dimension, self.dimension))
        for block, sl in self._slices():
            H[sl, sl] = block._hessian(w[sl] / self.eta) / self.eta ** 2
        return H

    def conjugate_gradient(self, y, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
        # blockwise: grad b(w_l / eta) / eta = y_l  <=>  w_l = eta * grad b*(eta * y_l)
        y = self._as_vector(y)
        w = np.empty_like(y)
        for block, sl in self._slices():
            w[sl] = self.eta * block.conjugate_gradient(self.eta * y[sl], tol, max_iter)
        return w

    @property
    def linear_gradient_coefficient(self):
        coefficients = {b.linear_gradient_coefficient for b in self.blocks}
        if len(coefficients) != 1 or None in coefficients:
            return None
        return coefficients.pop() / self.eta ** 2

    def with_dimension(self, dimension):
        raise ArgumentError("Composite potentials have a fixed block layout")

    @property
    def spec(self):
        inner = self.blocks[0].spec
        if self.eta != 1.0:
            inner = f"{inner}:eta={self.eta!r}"
        return inner

    def __repr__(self):
        return (f"{type(self).__name__}({self.spec}, blocks={len(self.blocks)}, "
                f"dimension={self.dimension})")


class SeparablePotential(CompositePotential):
    """phi(w) = sum_j base(w_j) over M copies of the base dimension."""

    def __init__(self, base: LegendrePotential, copies: int):
        if copies < 1:
            raise ArgumentError("Number of copies must be at least 1", copies=copies)
        super().__init__([base] * copies)
        self.base = base
        self.copies = copies


class LayerScaledPotential(CompositePotential):
    """phi_hat(w) = sum_l base(w_l / eta) over the layers of a parameter vector."""

    def __init__(self, base: LegendrePotential, eta: float, layer_shapes: Sequence[int]):
        if not layer_shapes:
            raise ArgumentError("layer_shapes must be nonempty")
        blocks = [base.with_dimension(int(size)) for size in layer_shapes]
        super().__init__(blocks, eta)
        self.base = base
        self.layer_shapes = tuple(int(s) for s in layer_shapes)


def separable(base: LegendrePotential, copies: int) -> SeparablePotential:
    return SeparablePotential(base, copies)


def layer_scaled(base: LegendrePotential, eta: float, shapes: Sequence[int]) -> LayerScaledPotential:
    return LayerScaledPotential(base, eta, shapes)


def make_potential(kind, dimension: int, epsilon_quad: float = 0.0,
                   scale: float = 1.0, q: float = 1.0) -> LegendrePotential:
    """Build an atomic potential of the given kind."""
    if not isinstance(kind, PotentialKind):
        kind = PotentialKind.parse(kind)
    if kind is PotentialKind.QUAD:
        return QuadPotential(dimension, scale=scale)
    if kind is PotentialKind.SCALED_QUAD:
        return ScaledQuadPotential(dimension, q=q)
    if kind is PotentialKind.CUBIC:
        return CubicPotential(dimension, epsilon_quad=epsilon_quad)
    simple = {
        PotentialKind.TAN: TanPotential,
        PotentialKind.TAN_SEP: TanSepPotential,
        PotentialKind.LOG: LogPotential,
        PotentialKind.LOG_SEP: LogSepPotential,
    }
    if kind in simple:
        return simple[kind](dimension)
    raise ArgumentError(f"Cannot build an atomic potential of kind {kind.value}")


@dataclass(frozen=True)
class PotentialSpec:
    """Parsed ``<kind>[:eta=<float>][:eps=<float>]`` string."""
    kind: PotentialKind
    eta: float = 1.0
    eps: float = 0.0
    scale: float = 1.0
    q: float = 1.0

    OPTIONS = ("eta", "eps", "scale", "q")

    @classmethod
    def parse(cls, text: str) -> "PotentialSpec":
        parts = [p for p in str(text).strip().split(":") if p]
        if not parts:
            raise ArgumentError("Empty potential name")
        options = {}
        for part in parts[1:]:
            key, sep, raw = part.partition("=")
            key = key.strip()
            if not sep or key not in cls.OPTIONS:
                raise ArgumentError(f"Bad potential option '{part}'", spec=text)
            try:
                options[key] = float(raw)
            except ValueError:
                raise ArgumentError(f"Potential option {key} must be a number", spec=text) from None
        spec = cls(PotentialKind.parse(parts[0]), **options)
        if spec.eta <= 0:
            raise ArgumentError("Scaling eta must be positive", spec=text)
        return spec

    def build(self, dimension: int) -> LegendrePotential:
        """Potential on R^dimension; eta != 1 wraps it as a single scaled block."""
        atom = make_potential(self.kind, dimension, self.eps, self.scale, self.q)
        if self.eta == 1.0:
            return atom
        return CompositePotential([atom], self.eta)

    def build_layered(self, layer_shapes: Sequence[int]) -> LayerScaledPotential:
        atom = make_potential(self.kind, 1, self.eps, self.scale, self.q)
        return LayerScaledPotential(atom, self.eta, layer_shapes)

    def __str__(self) -> str:
        text = self.kind.value
        if self.eta != 1.0:
            text += f":eta={self.eta!r}"
        if self.eps != 0.0:
            text += f":eps={self.eps!r}"
        if self.scale != 1.0:
            text += f":scale={self.scale!r}"
        if self.q != 1.0:
            text += f":q={self.q!r}"
        return text


def parse_potential(text: str, dimension: int) -> LegendrePotential:
    """Build the potential named by a config string such as "tan" or "log-sep:eta=2"."""
    return PotentialSpec.parse(text).build(dimension)


ASSUMPTIONS = ("A1", "A2", "A3", "A4", "A5")

ASSUMPTION_TITLES = {
    "A1": "proper lsc convex",
    "A2": "open domain, boundary blow-up",
    "A3": "C2 with positive definite Hessian",
    "A4": "super-coercive",
    "A5": "phi(0) = 0 and grad phi(0) = 0",
}


@dataclass
class SampleSpec:
    """Sample points used by :func:`check_assumptions`.

    ``points`` are in-domain rows (the origin is always checked as well),
    ``directions`` are unit vectors for boundary approach and coercivity rays.
    """
    points: np.ndarray
    directions: np.ndarray
    approach: Tuple[float, ...] = (0.9, 0.99, 0.999, 1 - 1e-4, 1 - 1e-5, 1 - 1e-6)
    ray_scales: Tuple[float, ...] = (1.0, 10.0, 100.0, 1e3, 1e4)
    blowup_threshold: float = 10.0

    @classmethod
    def default(cls, potential: LegendrePotential, n_points: int = 50,
                n_directions: int = 8, seed: int = 0) -> "SampleSpec":
        rng = np.random.default_rng(seed)
        m = potential.dimension
        directions = rng.standard_normal((n_directions, m))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        rows = []
        for _ in range(n_points):
            d = rng.standard_normal(m)
            d /= np.linalg.norm(d)
            reach = min(potential.domain_scale(d), 3.0)
            rows.append(rng.uniform(0.0, 0.95) * reach * d)
        return cls(points=np.array(rows), directions=directions)


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""
    witness: Optional[np.ndarray] = None


@dataclass
class AssumptionReport:
    potential: str
    checks: Dict[str, AssumptionCheck] = field(default_factory=dict)

    def passed(self, name: str) -> bool:
        return self.checks[name].passed

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> List[AssumptionCheck]:
        return [c for c in self.checks.values() if not c.passed]

    def as_rows(self) -> List[Dict[str, str]]:
        rows = []
        for name in ASSUMPTIONS:
            check = self.checks[name]
            witness = "" if check.witness is None else np.array2string(check.witness, precision=6)
            rows.append({
                "assumption": name,
                "property": ASSUMPTION_TITLES[name],
                "status": "pass" if check.passed else "FAIL",
                "detail": check.detail,
                "witness": witness,
            })
        return rows


def check_assumptions(p: LegendrePotential, samples: Optional[SampleSpec] = None) -> AssumptionReport:
    """Executable checks of the Legendre assumptions on sampled points.

    Args:
        p: Potential to check
        samples: Sample points and tolerances; defaults depend on the domain

    Returns:
        AssumptionReport with one verdict per assumption
    """
    samples = samples or SampleSpec.default(p)
    origin = np.zeros(p.dimension)
    points = np.vstack([origin[None, :], np.asarray(samples.points, float).reshape(-1, p.dimension)])
    report = AssumptionReport(potential=p.spec)

    report.checks["A1"] = _check_convexity(p, points)
    report.checks["A2"] = _check_blowup(p, samples)
    report.checks["A3"] = _check_hessian(p, points)
    report.checks["A4"] = _check_coercivity(p, samples, report.checks["A2"])
    report.checks["A5"] = _check_origin(p)

    for check in report.failures():
        logger.info(f"{p.spec}: assumption {check.name} fails ({check.detail})")
    return report


def _check_convexity(p: LegendrePotential, points: np.ndarray) -> AssumptionCheck:
    vals = p.values(points)
    if not np.all(np.isfinite(vals)):
        bad = points[np.argmax(~np.isfinite(vals))]
        return AssumptionCheck("A1", False, "infinite value at an in-domain sample", bad)
    a, b = points[:-1], points[1:]
    mid = p.values(0.5 * (a + b))
    excess = mid - 0.5 * (vals[:-1] + vals[1:])
    worst = int(np.argmax(excess))
    if excess[worst] > 1e-12 * (1.0 + abs(vals[worst])):
        return AssumptionCheck("A1", False, f"midpoint convexity violated by {excess[worst]:.3e}",
                               0.5 * (a[worst] + b[worst]))
    return AssumptionCheck("A1", True, f"midpoint convexity on {len(a)} pairs")


def _check_blowup(p: LegendrePotential, samples: SampleSpec) -> AssumptionCheck:
    if not p.bounded:
        return AssumptionCheck("A2", True, "dom phi is the whole space")
    for d in samples.directions:
        reach = p.domain_scale(d)
        outside = (1.0 + 1e-9) * reach * d
        if np.isfinite(p.value(outside)):
            return AssumptionCheck("A2", False, "finite value outside the domain", outside)
        path = [frac * reach * d for frac in samples.approach]
        vals = np.array([p.value(w) for w in path])
        grads = np.array([np.linalg.norm(p.gradient(w)) for w in path])
        if not (np.all(np.diff(vals) > 0) and np.all(np.diff(grads) > 0)):
            return AssumptionCheck("A2", False, "no monotone blow-up toward the boundary", path[-1])
        if vals[-1] <= samples.blowup_threshold:
            return AssumptionCheck("A2", False,
                                   f"value {vals[-1]:.3g} near the boundary below threshold", path[-1])
    return AssumptionCheck("A2", True, f"blow-up along {len(samples.directions)} directions")


def _check_hessian(p: LegendrePotential, points: np.ndarray) -> AssumptionCheck:
    lowest = math.inf
    for w in points:
        eig = float(np.linalg.eigvalsh(p.hessian(w)).min())
        lowest = min(lowest, eig)
        if eig <= 0.0:
            return AssumptionCheck("A3", False, f"Hessian min eigenvalue {eig:.3g}", w.copy())
    return AssumptionCheck("A3", True, f"min Hessian eigenvalue {lowest:.3g}")


def _check_coercivity(p: LegendrePotential, samples: SampleSpec, blowup: AssumptionCheck) -> AssumptionCheck:
    if p.bounded:
        return AssumptionCheck("A4", blowup.passed, "vacuous through boundary blow-up")
    for d in samples.directions:
        ratios = np.array([p.value(t * d) / t for t in samples.ray_scales])
        if not np.all(np.diff(ratios) > 0) or ratios[-1] < 10.0 * ratios[0]:
            return AssumptionCheck("A4", False, "phi(t d)/t not growing without bound", d)
    return AssumptionCheck("A4", True, f"growth along {len(samples.directions)} rays")


def _check_origin(p: LegendrePotential) -> AssumptionCheck:
    origin = np.zeros(p.dimension)
    value = p.value(origin)
    grad = float(np.linalg.norm(p.gradient(origin)))
    if value != 0.0 or grad != 0.0:
        return AssumptionCheck("A5", False, f"phi(0)={value:.3g}, |grad phi(0)|={grad:.3g}", origin)
    return AssumptionCheck("A5", True, "exact at the origin")
