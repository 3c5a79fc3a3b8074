"""Functions f being smoothed or trained.

Test functions with known regularity, a small multilayer perceptron with
manual backpropagation, synthetic datasets and sharding.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ArgumentError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A function f with value oracle and, where smooth, gradient/Hessian.

    ``nonsmooth_points`` lists the kinks; with ``smooth=False`` and no
    gradient oracle the function is treated as nowhere differentiable.
    """
    __test__ = False

    name: str
    dimension: int
    value_rows: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    gradient_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    hessian_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)
    lower_bound: float = -math.inf
    smooth: bool = True
    nonsmooth_points: Tuple[Tuple[float, ...], ...] = ()
    prox_regular_everywhere: bool = True

    def values(self, Z) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1 and self.dimension == 1:
            Z = Z[:, None]
        if Z.ndim != 2 or Z.shape[1] != self.dimension:
            raise ArgumentError(f"{self.name} expects rows of length {self.dimension}", shape=Z.shape)
        return self.value_rows(Z)

    def value(self, z) -> float:
        z = self._as_vector(z)
        return float(self.values(z[None, :])[0])

    def is_smooth_at(self, z) -> bool:
        z = self._as_vector(z)
        if self.gradient_fn is None or not np.isfinite(self.value(z)):
            return False
        return not any(np.any(z == np.asarray(p)) for p in self.nonsmooth_points)

    def gradient(self, z) -> np.ndarray:
        z = self._as_vector(z)
        if not self.is_smooth_at(z):
            raise DomainError(f"{self.name} is not differentiable here", point=z)
        return np.asarray(self.gradient_fn(z), dtype=float)

    def hessian(self, z) -> Optional[np.ndarray]:
        z = self._as_vector(z)
        if self.hessian_fn is None or not self.is_smooth_at(z):
            return None
        return np.atleast_2d(np.asarray(self.hessian_fn(z), dtype=float))

    @property
    def bounded_below(self) -> bool:
        return self.lower_bound > -math.inf

    def _as_vector(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 0:
            z = z.reshape(1)
        if z.shape != (self.dimension,):
            raise ArgumentError(f"{self.name} expects a vector of length {self.dimension}", shape=z.shape)
        return z


def testfn_eval(f: TestFunction, z) -> Tuple[float, Optional[np.ndarray]]:
    """Value, and gradient when f is differentiable at z."""
    value = f.value(z)
    grad = f.gradient(z) if f.is_smooth_at(z) else None
    return value, grad


def _abs(dimension: int) -> TestFunction:
    return TestFunction(
        "abs", dimension,
        value_rows=lambda Z: np.sum(np.abs(Z), axis=1),
        gradient_fn=np.sign,
        hessian_fn=lambda z: np.zeros((len(z), len(z))),
        lower_bound=0.0, smooth=False, nonsmooth_points=((0.0,),),
    )


def _neg_cos(dimension: int) -> TestFunction:
    return TestFunction(
        "neg_cos", dimension,
        value_rows=lambda Z: -np.sum(np.cos(Z), axis=1),
        gradient_fn=np.sin,
        hessian_fn=lambda z: np.diag(np.cos(z)),
        lower_bound=-float(dimension),
    )


def _double_well(dimension: int) -> TestFunction:
    return TestFunction(
        "double_well", dimension,
        value_rows=lambda Z: np.sum((Z * Z - 1.0) ** 2, axis=1),
        gradient_fn=lambda z: 4.0 * z * (z * z - 1.0),
        hessian_fn=lambda z: np.diag(12.0 * z * z - 4.0),
        lower_bound=0.0,
    )


def _rosenbrock_2d(dimension: int = 2, a: float = 1.0, b: float = 100.0) -> TestFunction:
    if dimension != 2:
        raise ArgumentError("rosenbrock_2d is two-dimensional", dimension=dimension)

    def grad(z):
        x, y = z
        return np.array([-2.0 * (a - x) - 4.0 * b * x * (y - x * x), 2.0 * b * (y - x * x)])

    def hess(z):
        x, y = z
        return np.array([[2.0 - 4.0 * b * (y - 3.0 * x * x), -4.0 * b * x],
                         [-4.0 * b * x, 2.0 * b]])

    return TestFunction(
        "rosenbrock_2d", 2,
        value_rows=lambda Z: (a - Z[:, 0]) ** 2 + b * (Z[:, 1] - Z[:, 0] ** 2) ** 2,
        gradient_fn=grad, hessian_fn=hess, lower_bound=0.0,
    )


def _two_point_indicator(dimension: int = 1, points: Sequence = (0.0, 1.0)) -> TestFunction:
    anchors = [np.broadcast_to(np.asarray(p, dtype=float), (dimension,)) for p in points]

    def value_rows(Z):
        hit = np.zeros(Z.shape[0], dtype=bool)
        for p in anchors:
            hit |= np.all(Z == p, axis=1)
        return np.where(hit, 0.0, np.inf)

    return TestFunction(
        "two_point_indicator", dimension, value_rows=value_rows,
        lower_bound=0.0, smooth=False,
    )


def _quadratic(dimension: int, curvature=1.0, center=0.0) -> TestFunction:
    a = np.broadcast_to(np.asarray(curvature, dtype=float), (dimension,)).copy()
    c = np.broadcast_to(np.asarray(center, dtype=float), (dimension,)).copy()
    return TestFunction(
        "quadratic", dimension,
        value_rows=lambda Z: 0.5 * np.sum(a * (Z - c) ** 2, axis=1),
        gradient_fn=lambda z: a * (z - c),
        hessian_fn=lambda z: np.diag(a),
        lower_bound=0.0 if np.all(a >= 0) else -math.inf,
    )


def _neg_quadratic(dimension: int) -> TestFunction:
    return TestFunction(
        "neg_quadratic", dimension,
        value_rows=lambda Z: -np.sum(Z * Z, axis=1),
        gradient_fn=lambda z: -2.0 * z,
        hessian_fn=lambda z: -2.0 * np.eye(len(z)),
    )


def _zero(dimension: int) -> TestFunction:
    return TestFunction(
        "zero", dimension,
        value_rows=lambda Z: np.zeros(Z.shape[0]),
        gradient_fn=np.zeros_like,
        hessian_fn=lambda z: np.zeros((len(z), len(z))),
        lower_bound=0.0,
    )


TEST_FUNCTIONS = {
    "abs": _abs,
    "neg_cos": _neg_cos,
    "double_well": _double_well,
    "rosenbrock_2d": _rosenbrock_2d,
    "two_point_indicator": _two_point_indicator,
    "quadratic": _quadratic,
    "neg_quadratic": _neg_quadratic,
    "zero": _zero,
}


def make_test_function(name: str, dimension: Optional[int] = None, **params) -> TestFunction:
    """Build a library function by name (``neg-cos`` and ``neg_cos`` both work)."""
    key = name.strip().lower().replace("-", "_")
    if key not in TEST_FUNCTIONS:
        raise ArgumentError(f"Unknown test function: {name}", supported=sorted(TEST_FUNCTIONS))
    if dimension is None:
        dimension = 2 if key == "rosenbrock_2d" else 1
    return TEST_FUNCTIONS[key](dimension, **params)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature rows with integer class labels."""
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int = 2

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=float)
        labels = np.asarray(self.labels, dtype=int)
        if inputs.ndim != 2 or labels.ndim != 1 or len(inputs) != len(labels):
            raise ArgumentError("inputs and labels must have equal length",
                                inputs=inputs.shape, labels=labels.shape)
        if len(labels) and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ArgumentError("label outside class range", n_classes=self.n_classes)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.inputs.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return Dataset(self.inputs[indices], self.labels[indices], self.n_classes)

    def to_csv(self, path: Union[str, Path]) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow([f"x{i}" for i in range(self.n_features)] + ["label"])
            for x, h in zip(self.inputs, self.labels):
                writer.writerow([repr(float(v)) for v in x] + [int(h)])

    @classmethod
    def from_csv(cls, path: Union[str, Path], n_classes: Optional[int] = None) -> "Dataset":
        with open(path, "r", newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            next(reader, None)
            rows = [row for row in reader if row]
        inputs = np.array([[float(v) for v in row[:-1]] for row in rows])
        labels = np.array([int(row[-1]) for row in rows], dtype=int)
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if len(labels) else 2
        return cls(inputs, labels, n_classes)


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "two_gaussians"
    n: int = 200
    noise: float = 0.3


def synth_dataset(spec: DatasetSpec, seed: int) -> Dataset:
    """Deterministic two-class toy data with floor(n/2) / ceil(n/2) classes.

    Args:
        spec: Kind ("two_gaussians" or "two_moons"), size and noise level
        seed: Seed for the noise and the row order

    Returns:
        Shuffled Dataset with labels 0 and 1
    """
    if spec.n < 2:
        raise ArgumentError("Need at least two samples", n=spec.n)
    rng = np.random.default_rng(seed)
    n0 = spec.n // 2
    n1 = spec.n - n0
    kind = spec.kind.replace("-", "_")

    if kind == "two_gaussians":
        centers = np.vstack([np.full((n0, 2), -1.0), np.full((n1, 2), 1.0)])
    elif kind == "two_moons":
        t0 = np.linspace(0.0, math.pi, n0)
        t1 = np.linspace(0.0, math.pi, n1)
        upper = np.column_stack([np.cos(t0), np.sin(t0)])
        lower = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
        centers = np.vstack([upper, lower])
    else:
        raise ArgumentError(f"Unknown dataset kind: {spec.kind}",
                            supported=["two_gaussians", "two_moons"])

    inputs = centers + spec.noise * rng.standard_normal(centers.shape)
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    order = rng.permutation(spec.n)
    return Dataset(inputs[order], labels[order], n_classes=2)


class ShardMode(Enum):
    FULL_OVERLAP = "full_overlap"
    DISJOINT = "disjoint"

    @classmethod
    def parse(cls, mode: Union["ShardMode", str]) -> "ShardMode":
        try:
            return cls(mode)
        except ValueError:
            raise ArgumentError(f"Unknown shard mode: {mode}",
                                supported=[m.value for m in cls]) from None


def shard_dataset(d: Dataset, M: int, mode: Union[ShardMode, str] = ShardMode.FULL_OVERLAP) -> List[np.ndarray]:
    """Index sets I_j of the M workers.

    Args:
        d: Dataset to shard
        M: Number of workers
        mode: Every worker sees all rows, or contiguous disjoint blocks

    Returns:
        One index array per worker
    """
    mode = ShardMode.parse(mode)
    if M < 1:
        raise ArgumentError("Number of workers must be at least 1", M=M)
    universe = np.arange(len(d))
    if mode is ShardMode.FULL_OVERLAP:
        return [universe.copy() for _ in range(M)]
    if len(d) < M:
        raise ArgumentError("Disjoint sharding needs at least one sample per worker",
                            samples=len(d), M=M)
    return [np.asarray(s) for s in np.array_split(universe, M)]


def split_dataset(d: Dataset, test_fraction: float, seed: int) -> Tuple[Dataset, Optional[Dataset]]:
    """Deterministic train/test split; no test set when the fraction is 0."""
    if not 0.0 <= test_fraction < 1.0:
        raise ArgumentError("test_fraction must lie in [0, 1)", test_fraction=test_fraction)
    n_test = int(round(test_fraction * len(d)))
    if n_test == 0:
        return d, None
    order = np.random.default_rng(seed).permutation(len(d))
    return d.subset(np.sort(order[n_test:])), d.subset(np.sort(order[:n_test]))


@dataclass(frozen=True)
class MlpModel:
    """Dense ReLU network with softmax NLL loss and (nu/2)*||z||^2 regularizer.

    Parameter layout: for each layer the row-major (fan_out, fan_in) weight
    matrix followed by the bias vector.
    """
    layer_sizes: Tuple[int, ...]
    nu: float = 0.0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ArgumentError("layer_sizes needs at least input and output sizes", layer_sizes=sizes)
        if self.nu < 0:
            raise ArgumentError("nu must be nonnegative", nu=self.nu)
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def layer_param_sizes(self) -> Tuple[int, ...]:
        return tuple(i * o + o for i, o in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))

    @property
    def n_params(self) -> int:
        return sum(self.layer_param_sizes)

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def unflatten(self, z) -> List[Tuple[np.ndarray, np.ndarray]]:
        z = np.asarray(z, dtype=float)
        if z.shape != (self.n_params,):
            raise ArgumentError("Parameter vector has the wrong length",
                                expected=self.n_params, shape=z.shape)
        params, offset = [], 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = z[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            b = z[offset:offset + fan_out]
            offset += fan_out
            params.append((W, b))
        return params

    def flatten(self, params: Sequence[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        return np.concatenate([np.concatenate([np.ravel(W), np.ravel(b)]) for W, b in params])

    def init_params(self, seed: int) -> np.ndarray:
        """Uniform in [-s, s] with s = 1/sqrt(fan_in)."""
        rng = np.random.default_rng(seed)
        params = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            s = 1.0 / math.sqrt(fan_in)
            params.append((rng.uniform(-s, s, (fan_out, fan_in)), rng.uniform(-s, s, fan_out)))
        return self.flatten(params)

    def _check_batch(self, inputs, labels) -> Tuple[np.ndarray, np.ndarray]:
        X = np.atleast_2d(np.asarray(inputs, dtype=float))
        y = np.atleast_1d(np.asarray(labels, dtype=int))
        if len(y) == 0:
            raise ArgumentError("Batch must be nonempty")
        if X.shape != (len(y), self.layer_sizes[0]):
            raise ArgumentError("Batch inputs have the wrong shape",
                                shape=X.shape, expected_features=self.layer_sizes[0])
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ArgumentError("Label out of range", n_classes=self.n_classes)
        return X, y

    def forward(self, z, inputs) -> np.ndarray:
        """Logits H(x; z) for each row of inputs."""
        a = np.atleast_2d(np.asarray(inputs, dtype=float))
        params = self.unflatten(z)
        for k, (W, b) in enumerate(params):
            a = a @ W.T + b
            if k < len(params) - 1:
                a = np.maximum(a, 0.0)
        return a

    def predict(self, z, inputs) -> np.ndarray:
        return np.argmax(self.forward(z, inputs), axis=1)

    def nll(self, z, inputs, labels) -> float:
        """Mean softmax negative log-likelihood without the regularizer."""
        X, y = self._check_batch(inputs, labels)
        logits = self.forward(z, X)
        return float(np.mean(_logsumexp(logits) - logits[np.arange(len(y)), y]))

    def error_rate(self, z, inputs, labels) -> float:
        X, y = self._check_batch(inputs, labels)
        return float(np.mean(self.predict(z, X) != y))

    def loss(self, z, inputs, labels) -> float:
        """Mean NLL plus (nu/2)||z||^2, without the backward pass."""
        loss = self.nll(z, inputs, labels)
        if self.nu:
            z = np.asarray(z, dtype=float)
            loss += 0.5 * self.nu * float(z @ z)
        return loss

    def loss_grad(self, z, inputs, labels) -> Tuple[float, np.ndarray]:
        """Mean NLL plus (nu/2)||z||^2 and its exact gradient."""
        z = np.asarray(z, dtype=float)
        X, y = self._check_batch(inputs, labels)
        params = self.unflatten(z)

        activations = [X]
        pre = []
        a = X
        for k, (W, b) in enumerate(params):
            s = a @ W.T + b
            pre.append(s)
            a = np.maximum(s, 0.0) if k < len(params) - 1 else s
            activations.append(a)

        logits = activations[-1]
        lse = _logsumexp(logits)
        B = len(y)
        loss = float(np.mean(lse - logits[np.arange(B), y]))

        probs = np.exp(logits - lse[:, None])
        delta = probs
        delta[np.arange(B), y] -= 1.0
        delta /= B

        grads = [None] * len(params)
        for k in range(len(params) - 1, -1, -1):
            W, _ = params[k]
            grads[k] = (delta.T @ activations[k], delta.sum(axis=0))
            if k > 0:
                delta = (delta @ W) * (pre[k - 1] > 0.0)

        grad = self.flatten(grads)
        if self.nu:
            loss += 0.5 * self.nu * float(z @ z)
            grad = grad + self.nu * z
        return loss, grad


def _logsumexp(logits: np.ndarray) -> np.ndarray:
    peak = logits.max(axis=1)
    return peak + np.log(np.sum(np.exp(logits - peak[:, None]), axis=1))


Batch = Union[Dataset, Sequence[Tuple[Sequence[float], int]]]


def mlp_loss_grad(m: MlpModel, z, batch: Batch) -> Tuple[float, np.ndarray]:
    """Loss and gradient on a batch given as a Dataset or (x, h) pairs."""
    if isinstance(batch, Dataset):
        return m.loss_grad(z, batch.inputs, batch.labels)
    pairs = list(batch)
    if not pairs:
        raise ArgumentError("Batch must be nonempty")
    inputs = np.array([np.asarray(x, dtype=float) for x, _ in pairs])
    labels = np.array([int(h) for _, h in pairs])
    return m.loss_grad(z, inputs, labels)


class DatasetObjective:
    """Empirical risk of an MLP over a dataset, evaluated on index batches."""

    stochastic = True

    def __init__(self, model: MlpModel, dataset: Dataset):
        self.model = model
        self.dataset = dataset

    @property
    def n_params(self) -> int:
        return self.model.n_params

    @property
    def layer_shapes(self) -> Tuple[int, ...]:
        return self.model.layer_param_sizes

    def loss_grad(self, z, indices) -> Tuple[float, np.ndarray]:
        indices = np.asarray(indices, dtype=int)
        return self.model.loss_grad(z, self.dataset.inputs[indices], self.dataset.labels[indices])

    def value(self, z, indices) -> float:
        indices = np.asarray(indices, dtype=int)
        return self.model.loss(z, self.dataset.inputs[indices], self.dataset.labels[indices])

    def metrics(self, z, dataset: Optional[Dataset] = None) -> Tuple[float, Optional[float]]:
        """Full-set NLL and error rate."""
        d = dataset or self.dataset
        return self.model.nll(z, d.inputs, d.labels), self.model.error_rate(z, d.inputs, d.labels)


class FunctionObjective:
    """Deterministic test function; batches are ignored."""

    stochastic = False

    def __init__(self, f: TestFunction):
        self.f = f

    @property
    def n_params(self) -> int:
        return self.f.dimension

    @property
    def layer_shapes(self) -> Tuple[int, ...]:
        return (self.f.dimension,)

    def loss_grad(self, z, indices=None) -> Tuple[float, np.ndarray]:
        return self.f.value(z), self.f.gradient(z)

    def value(self, z, indices=None) -> float:
        return self.f.value(z)

    def metrics(self, z, dataset=None) -> Tuple[float, Optional[float]]:
        return self.f.value(z), None


def save_params(path: Union[str, Path], z) -> None:
    """CSV (one value per line) for .csv paths, raw little-endian float64 otherwise."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    z = np.asarray(z, dtype=float)
    if path.suffix == ".csv":
        path.write_text("".join(f"{float(v)!r}\n" for v in z), encoding="utf-8")
    else:
        z.astype("<f8").tofile(path)


def load_params(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".csv":
        lines = path.read_text(encoding="utf-8").split()
        return np.array([float(v) for v in lines])
    return np.fromfile(path, dtype="<f8")
