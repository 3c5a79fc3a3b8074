"""Stochastic alternating linearized minimization with M simulated workers.

Each synchronous round updates the consensus variable u from a snapshot of
the worker copies z_j, then every worker takes a Nesterov-momentum step on

    f_j(z_j) + (1/lambda) * phi_hat(u - z_j)

using a minibatch drawn from its own counter-based random stream.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import psutil

from .errors import (AnisoError, ArgumentError, DomainError, LineSearchError,
                     StepFailureError)
from .linesearch import MAX_HALVINGS, backtrack_feasible
from .models import DatasetObjective, FunctionObjective, ShardMode, shard_dataset
from .potentials import LegendrePotential, PotentialSpec
from .prox import ProxProblem, stationarity_measure
from .records import TRAIN_COLUMNS, RunRecord

logger = logging.getLogger(__name__)


def default_threads() -> int:
    """Physical core count, at least 1."""
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


@dataclass
class TrainerConfig:
    workers: int = 4
    potential: str = "quad"
    lam: float = 0.05
    tau: float = 0.005
    sigma: float = 0.05
    kappa: float = 0.9
    batch_size: int = 20
    iterations: int = 2000
    seed: int = 0
    shard_mode: str = "full_overlap"
    nu: float = 0.0
    tau_includes_inv_lambda: bool = False
    delta_uses_stale_u: bool = False
    # sigma_t = sigma / (1 + sigma_decay * t)
    sigma_decay: float = 0.0
    metrics_every: int = 50
    envelope_every: int = 0
    n_threads: int = 1
    full_batch: bool = False
    record_timing: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise ArgumentError("Need at least one worker", workers=self.workers)
        if not (self.lam > 0 and self.tau > 0 and self.sigma > 0):
            raise ArgumentError("lambda, tau and sigma must be positive",
                                lam=self.lam, tau=self.tau, sigma=self.sigma)
        if not 0.0 <= self.kappa < 1.0:
            raise ArgumentError("Momentum kappa must lie in [0, 1)", kappa=self.kappa)
        if self.batch_size < 1 or self.iterations < 1:
            raise ArgumentError("batch_size and iterations must be at least 1",
                                batch_size=self.batch_size, iterations=self.iterations)
        if self.sigma_decay < 0 or self.metrics_every < 1 or self.envelope_every < 0:
            raise ArgumentError("Bad schedule settings", sigma_decay=self.sigma_decay,
                                metrics_every=self.metrics_every, envelope_every=self.envelope_every)
        ShardMode.parse(self.shard_mode)
        PotentialSpec.parse(self.potential)
        if self.n_threads < 1:
            self.n_threads = default_threads()

    @property
    def potential_spec(self) -> PotentialSpec:
        return PotentialSpec.parse(self.potential)

    def sigma_at(self, t: int) -> float:
        return self.sigma / (1.0 + self.sigma_decay * t)


@dataclass(frozen=True)
class WorkerState:
    index: int
    z: np.ndarray
    velocity: np.ndarray


def worker_rng(seed: int, worker: int, iteration: int) -> np.random.Generator:
    """Independent, reproducible stream for worker j at round t."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, worker, iteration])))


def sample_batch(rng: Optional[np.random.Generator], shard: Optional[np.ndarray],
                 batch_size: int, full_batch: bool = False) -> Optional[np.ndarray]:
    """Uniform minibatch without replacement from the shard.

    Args:
        rng: Worker stream for this round, or None for deterministic objectives
        shard: Row indices owned by the worker, or None
        batch_size: Rows to draw
        full_batch: Return the whole shard

    Returns:
        Sorted row indices, or None when the objective has no data
    """
    if shard is None:
        return None
    if full_batch or batch_size >= len(shard) or rng is None:
        return shard
    return np.sort(rng.choice(shard, size=batch_size, replace=False))


def worker_delta(worker: WorkerState, u: np.ndarray, objective, phi_hat: LegendrePotential,
                 lam: float, batch: Optional[np.ndarray] = None,
                 at: Optional[np.ndarray] = None) -> np.ndarray:
    """delta_j + grad R(z_j) - (1/lambda) grad phi_hat(u - z_j).

    The objective's minibatch gradient already carries the regularizer R.

    Args:
        worker: Current worker state
        u: Consensus variable
        objective: Worker objective with ``loss_grad(z, batch)``
        phi_hat: Layered coupling potential
        lam: Coupling weight lambda
        batch: Minibatch row indices
        at: Evaluate at this point instead of worker.z (look-ahead)

    Returns:
        Gradient of the worker's subproblem in z

    Raises:
        DomainError: u - z lies outside dom phi_hat
    """
    z = worker.z if at is None else at
    w = u - z
    if not phi_hat.contains(w):
        raise DomainError("u - z_j lies outside dom phi_hat", worker=worker.index)
    _, grad = objective.loss_grad(z, batch)
    return grad - phi_hat.gradient(w) / lam


def _feasible_for(phi_hat: LegendrePotential, anchors: Sequence[np.ndarray], z: np.ndarray) -> bool:
    return all(phi_hat.contains(u - z) for u in anchors)


def momentum_step(worker: WorkerState, delta: Callable[[np.ndarray], np.ndarray],
                  sigma: float, kappa: float, phi_hat: LegendrePotential,
                  anchors: Sequence[np.ndarray]) -> WorkerState:
    """Nesterov step v' = kappa v - sigma delta(z + kappa v), z' = z + v'.

    The look-ahead falls back to z when it leaves the domain; v' is halved
    until u - z' lies in dom phi_hat for every anchor u.
    """
    look = worker.z + kappa * worker.velocity
    if kappa and not _feasible_for(phi_hat, anchors, look):
        look = worker.z
    velocity = kappa * worker.velocity - sigma * delta(look)

    for _ in range(MAX_HALVINGS + 1):
        z_new = worker.z + velocity
        if _feasible_for(phi_hat, anchors, z_new):
            return WorkerState(worker.index, z_new, velocity)
        velocity = 0.5 * velocity
    raise StepFailureError("Feasibility backstop exhausted", worker=worker.index,
                           halvings=MAX_HALVINGS)


def coupling_value(u: np.ndarray, zs: Sequence[np.ndarray], phi_hat: LegendrePotential,
                   lam: float) -> float:
    total = 0.0
    for z in zs:
        value = phi_hat.value(u - z)
        if not math.isfinite(value):
            return math.inf
        total += value
    return total / lam


def consensus_update(u: np.ndarray, zs: Sequence[np.ndarray], tau: float,
                     phi_hat: LegendrePotential, lam: float,
                     tau_includes_inv_lambda: bool = False) -> Tuple[np.ndarray, float]:
    """u - tau c sum_j grad phi_hat(u - z_j), line-searched on the coupling term.

    Args:
        u: Current consensus variable
        zs: Worker copies
        tau: Initial step
        phi_hat: Layered coupling potential
        lam: Coupling weight lambda
        tau_includes_inv_lambda: Take c = 1 instead of 1/lambda

    Returns:
        Tuple of (new u, accepted step)
    """
    for j, z in enumerate(zs):
        if not phi_hat.contains(u - z):
            raise DomainError("u - z_j lies outside dom phi_hat", worker=j)
    c = 1.0 if tau_includes_inv_lambda else 1.0 / lam
    direction = -c * sum(phi_hat.gradient(u - z) for z in zs)
    ls = backtrack_feasible(lambda x: coupling_value(x, zs, phi_hat, lam), u, direction, tau)
    return ls.point, ls.step


def consensus_gap(u: np.ndarray, workers: Sequence) -> float:
    """max_j ||u - z_j||_inf."""
    zs = [w.z if isinstance(w, WorkerState) else np.asarray(w) for w in workers]
    if not zs:
        return 0.0
    return float(max(np.max(np.abs(u - z)) for z in zs))


@dataclass
class TrainResult:
    record: RunRecord
    u: np.ndarray
    workers: List[WorkerState]
    phi_hat: LegendrePotential
    infinite_evaluations: int = 0


def initial_point(objective, cfg: TrainerConfig, initial=None) -> np.ndarray:
    if initial is not None:
        z0 = np.atleast_1d(np.asarray(initial, dtype=float))
        if z0.shape != (objective.n_params,):
            raise ArgumentError("Initial point has the wrong size",
                                expected=objective.n_params, got=z0.size)
        return z0.copy()
    if isinstance(objective, DatasetObjective):
        return objective.model.init_params(cfg.seed)
    return np.zeros(objective.n_params)


def _shards(objective, cfg: TrainerConfig) -> List[Optional[np.ndarray]]:
    if isinstance(objective, DatasetObjective):
        return shard_dataset(objective.dataset, cfg.workers, cfg.shard_mode)
    return [None] * cfg.workers


class _Metrics:
    """Row assembly shared by the trainer and the baseline."""

    def __init__(self, cfg: TrainerConfig, objective, shards, phi_hat, started: float):
        self.cfg = cfg
        self.objective = objective
        self.shards = shards
        self.phi_hat = phi_hat
        self.started = started
        self.infinite = 0

    def objective_value(self, u: np.ndarray, zs: Sequence[np.ndarray]) -> float:
        coupling = coupling_value(u, zs, self.phi_hat, self.cfg.lam)
        data = sum(self.objective.value(z, shard) for z, shard in zip(zs, self.shards))
        value = data + coupling
        if not math.isfinite(value):
            self.infinite += 1
        return value

    def envelope_norm(self, u: np.ndarray, zs: Sequence[np.ndarray]) -> Optional[float]:
        if not isinstance(self.objective, FunctionObjective):
            return None
        prob = ProxProblem(self.objective.f, self.phi_hat, self.cfg.lam)
        try:
            return stationarity_measure(prob, u, np.mean(zs, axis=0))
        except AnisoError as e:
            logger.warning(f"Envelope measure skipped: {e}")
            return None

    def row(self, t: int, u: np.ndarray, zs: Sequence[np.ndarray], envelope: bool) -> dict:
        loss, error = self.objective.metrics(u)
        wall = (time.perf_counter() - self.started) * 1000.0 if self.cfg.record_timing else None
        return dict(iter=t, F=self.objective_value(u, zs), train_loss=loss, train_error=error,
                    consensus_gap=consensus_gap(u, zs),
                    envelope_grad_norm=self.envelope_norm(u, zs) if envelope else None,
                    wall_ms=wall)


def _due(t: int, every: int, last: int) -> bool:
    return t == 0 or t == last or (every > 0 and t % every == 0)


def train(cfg: TrainerConfig, objective, initial=None) -> TrainResult:
    """T synchronous rounds of consensus update followed by worker steps.

    Workers of a round run on a thread pool; every worker reads the same
    immutable snapshot and draws from its own stream, so the result does
    not depend on ``cfg.n_threads``.

    Args:
        cfg: Trainer configuration
        objective: Worker objective (dataset-backed or a test function)
        initial: Optional starting vector; defaults to ``cfg.init``

    Returns:
        TrainResult with the per-round record and the final iterates

    Raises:
        ArgumentError: Layer shapes do not match the parameter vector
        StepFailureError: A worker exhausted the feasibility backstop
    """
    n = objective.n_params
    phi_hat = cfg.potential_spec.build_layered(objective.layer_shapes)
    if phi_hat.dimension != n:
        raise ArgumentError("Layer shapes do not cover the parameter vector",
                            n_params=n, potential=phi_hat.dimension)
    shards = _shards(objective, cfg)
    z0 = initial_point(objective, cfg, initial)
    u = z0.copy()
    workers = [WorkerState(j, z0.copy(), np.zeros(n)) for j in range(cfg.workers)]

    record = RunRecord(TRAIN_COLUMNS)
    metrics = _Metrics(cfg, objective, shards, phi_hat, time.perf_counter())
    T = cfg.iterations
    record.append(**metrics.row(0, u, [w.z for w in workers], cfg.envelope_every > 0))

    logger.info(f"Training {cfg.workers} workers for {T} rounds, potential {cfg.potential}, "
                f"lambda={cfg.lam}, {cfg.n_threads} thread(s)")

    with ThreadPoolExecutor(max_workers=cfg.n_threads) as pool:
        for t in range(1, T + 1):
            snapshot = [w.z for w in workers]
            try:
                u_next, _ = consensus_update(u, snapshot, cfg.tau, phi_hat, cfg.lam,
                                             cfg.tau_includes_inv_lambda)
            except (LineSearchError, DomainError) as e:
                raise StepFailureError(f"Consensus update failed: {e.message}",
                                       iteration=t, **e.context) from e
            u_delta = u if cfg.delta_uses_stale_u else u_next
            anchors = [u_delta] if u_delta is u_next else [u_delta, u_next]
            sigma = cfg.sigma_at(t - 1)

            def step(worker: WorkerState) -> WorkerState:
                rng = worker_rng(cfg.seed, worker.index, t)
                batch = sample_batch(rng, shards[worker.index], cfg.batch_size, cfg.full_batch)
                delta = lambda at: worker_delta(worker, u_delta, objective, phi_hat, cfg.lam,
                                                batch, at)
                return momentum_step(worker, delta, sigma, cfg.kappa, phi_hat, anchors)

            try:
                workers = list(pool.map(step, workers))
            except (StepFailureError, DomainError) as e:
                raise StepFailureError(f"Worker step failed: {e.message}",
                                       iteration=t, **e.context) from e
            u = u_next

            if _due(t, cfg.metrics_every, T):
                envelope = t == T or (cfg.envelope_every > 0 and t % cfg.envelope_every == 0)
                record.append(**metrics.row(t, u, [w.z for w in workers], envelope))

    final = record.rows[-1]
    logger.info(f"Finished: F={final['F']:.6g}, train loss={final['train_loss']:.6g}, "
                f"consensus gap={final['consensus_gap']:.3e}")
    return TrainResult(record, u, workers, phi_hat, metrics.infinite)


def train_msgd(cfg: TrainerConfig, objective, initial=None) -> TrainResult:
    """Single-copy momentum SGD baseline.

    Uses worker 0's random stream and shard, so with M = 1 and a negligible
    coupling it follows the same trajectory as ``train``.
    """
    n = objective.n_params
    phi_hat = cfg.potential_spec.build_layered(objective.layer_shapes)
    shard = _shards(objective, replace(cfg, workers=1))[0]
    z = initial_point(objective, cfg, initial)
    velocity = np.zeros(n)

    record = RunRecord(TRAIN_COLUMNS)
    metrics = _Metrics(cfg, objective, [shard], phi_hat, time.perf_counter())
    T = cfg.iterations
    record.append(**metrics.row(0, z, [z], False))

    for t in range(1, T + 1):
        rng = worker_rng(cfg.seed, 0, t)
        batch = sample_batch(rng, shard, cfg.batch_size, cfg.full_batch)
        _, grad = objective.loss_grad(z + cfg.kappa * velocity, batch)
        velocity = cfg.kappa * velocity - cfg.sigma_at(t - 1) * grad
        z = z + velocity
        if _due(t, cfg.metrics_every, T):
            record.append(**metrics.row(t, z, [z], False))

    return TrainResult(record, z, [WorkerState(0, z, velocity)], phi_hat, metrics.infinite)
