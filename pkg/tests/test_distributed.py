import math
from itertools import combinations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from aniso.core.distributed import (TrainerConfig, WorkerState, _Metrics, consensus_gap,
                                    consensus_update, momentum_step, sample_batch, train, train_msgd,
                                    worker_delta, worker_rng)
from aniso.core.errors import ArgumentError, StepFailureError
from aniso.core.models import (DatasetObjective, DatasetSpec, FunctionObjective, MlpModel,
                               make_test_function, synth_dataset)
from aniso.core.potentials import QuadPotential, make_potential


class ConstantGradient:
    """Objective stub returning a fixed minibatch gradient."""

    def __init__(self, grad):
        self.grad = np.asarray(grad, dtype=float)

    def loss_grad(self, z, indices=None):
        return 0.0, self.grad


def small_config(**overrides):
    settings = dict(workers=3, potential="quad", lam=0.5, tau=0.01, sigma=0.05, kappa=0.9,
                    batch_size=5, iterations=20, metrics_every=5, record_timing=False)
    settings.update(overrides)
    return TrainerConfig(**settings)


class TestRandomStreams:

    def test_reproducible(self):
        a = worker_rng(7, 2, 11).random(5)
        b = worker_rng(7, 2, 11).random(5)
        assert_array_equal(a, b)

    def test_workers_and_rounds_differ(self):
        base = worker_rng(7, 0, 1).random(3)
        assert not np.array_equal(base, worker_rng(7, 1, 1).random(3))
        assert not np.array_equal(base, worker_rng(7, 0, 2).random(3))

    def test_batch_is_a_sorted_subset(self):
        shard = np.arange(10, 30)
        batch = sample_batch(worker_rng(0, 0, 1), shard, 6)
        assert len(batch) == 6 and len(set(batch.tolist())) == 6
        assert set(batch.tolist()) <= set(shard.tolist())
        assert_array_equal(batch, np.sort(batch))

    def test_full_shard_cases(self):
        shard = np.arange(4)
        assert_array_equal(sample_batch(worker_rng(0, 0, 1), shard, 10), shard)
        assert_array_equal(sample_batch(worker_rng(0, 0, 1), shard, 2, full_batch=True), shard)
        assert sample_batch(worker_rng(0, 0, 1), None, 2) is None

    def test_minibatch_gradient_is_unbiased(self, toy_objective, rng):
        shard = np.arange(6)
        z = 0.3 * rng.standard_normal(toy_objective.n_params)
        batches = list(combinations(shard, 3))
        mean = sum(toy_objective.loss_grad(z, list(b))[1] for b in batches) / len(batches)
        assert_allclose(mean, toy_objective.loss_grad(z, shard)[1], atol=1e-12)


class TestWorkerStep:

    def test_delta(self):
        worker = WorkerState(0, np.array([0.4]), np.zeros(1))
        delta = worker_delta(worker, np.array([0.6]), ConstantGradient([0.6]), QuadPotential(1), 1.0)
        assert delta[0] == pytest.approx(0.4)

    def test_momentum_matches_the_reference_recursion(self):
        f = make_test_function("quadratic", 1)
        objective = FunctionObjective(f)
        phi = QuadPotential(1)
        u, kappa, sigma = np.array([0.5]), 0.9, 0.1

        worker = WorkerState(0, np.array([0.0]), np.zeros(1))
        z, v = 0.0, 0.0
        for _ in range(5):
            current = worker
            worker = momentum_step(
                current, lambda at: worker_delta(current, u, objective, phi, 1.0, None, at),
                sigma, kappa, phi, [u])
            look = z + kappa * v
            v = kappa * v - sigma * (look - (0.5 - look))
            z = z + v
            assert_allclose(worker.z, [z], rtol=1e-12)
            assert_allclose(worker.velocity, [v], rtol=1e-12)

    def test_step_is_pulled_back_into_the_domain(self):
        phi = make_potential("log", 1)
        worker = WorkerState(0, np.array([0.0]), np.zeros(1))
        out = momentum_step(worker, lambda at: np.array([-5.0]), 1.0, 0.0, phi, [np.array([0.0])])
        assert phi.contains(0.0 - out.z)
        assert out.velocity[0] == pytest.approx(5.0 / 8.0)

    def test_backstop_exhaustion(self):
        phi = make_potential("log", 1)
        worker = WorkerState(3, np.array([0.0]), np.zeros(1))
        with pytest.raises(StepFailureError):
            momentum_step(worker, lambda at: np.array([math.nan]), 0.1, 0.0, phi, [np.zeros(1)])


class TestConsensus:

    def test_quad_moves_to_the_mean(self):
        zs = [np.array([1.0]), np.array([2.0]), np.array([3.0])]
        u, step = consensus_update(np.zeros(1), zs, 1.0 / 3.0, QuadPotential(1), 1.0)
        assert u[0] == pytest.approx(2.0)
        assert step == pytest.approx(1.0 / 3.0)

    def test_agreement_is_a_fixed_point(self):
        u = np.array([0.2, -0.1])
        new, _ = consensus_update(u, [u.copy(), u.copy()], 0.1, make_potential("tan", 2), 0.5)
        assert_array_equal(new, u)

    def test_symmetric_log_pulls_cancel(self):
        zs = [np.array([0.5]), np.array([-0.5])]
        u, _ = consensus_update(np.zeros(1), zs, 0.1, make_potential("log-sep", 1), 1.0)
        assert u[0] == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("M", [2, 4, 8])
    def test_quad_with_coefficient_one_over_m_is_the_mean(self, M, rng):
        lam = 0.3
        zs = [rng.standard_normal(3) for _ in range(M)]
        u, _ = consensus_update(rng.standard_normal(3), zs, lam / M, QuadPotential(3), lam)
        assert_allclose(u, np.mean(zs, axis=0), atol=1e-12)

    def test_gap(self):
        u = np.zeros(2)
        assert consensus_gap(u, [u.copy()]) == 0.0
        assert consensus_gap(u, [np.array([0.1, 0.0]), np.array([0.0, -0.3])]) == pytest.approx(0.3)
        assert consensus_gap(u, []) == 0.0


class TestTrainerConfig:

    @pytest.mark.parametrize("overrides", [dict(workers=0), dict(kappa=1.0), dict(lam=0.0),
                                           dict(shard_mode="round_robin"),
                                           dict(potential="hyperbolic"), dict(batch_size=0)])
    def test_rejects(self, overrides):
        with pytest.raises(ArgumentError):
            TrainerConfig(**overrides)

    def test_thread_default(self):
        assert TrainerConfig(n_threads=0).n_threads >= 1

    def test_sigma_schedule(self):
        cfg = TrainerConfig(sigma=0.1, sigma_decay=1.0)
        assert cfg.sigma_at(0) == 0.1 and cfg.sigma_at(1) == pytest.approx(0.05)


class TestTrain:

    def test_metric_rows(self, toy_objective):
        result = train(small_config(), toy_objective)
        assert result.record.column("iter") == [0, 5, 10, 15, 20]
        assert all(v is None for v in result.record.column("wall_ms"))
        assert result.phi_hat.dimension == toy_objective.n_params

    def test_thread_count_does_not_change_the_run(self, toy_objective):
        serial = train(small_config(n_threads=1), toy_objective)
        threaded = train(small_config(n_threads=3), toy_objective)
        assert serial.record.rows == threaded.record.rows
        assert_array_equal(serial.u, threaded.u)

    def test_seed_changes_the_run(self, toy_objective):
        a = train(small_config(seed=1), toy_objective)
        b = train(small_config(seed=2), toy_objective)
        assert not np.array_equal(a.u, b.u)

    def test_reduces_to_momentum_sgd(self, toy_objective):
        cfg = small_config(workers=1, kappa=0.0, lam=1e8, sigma=0.1, iterations=30)
        coupled = train(cfg, toy_objective)
        baseline = train_msgd(cfg, toy_objective)
        assert_allclose(coupled.workers[0].z, baseline.u, atol=1e-6)

    @pytest.mark.parametrize("potential", ["log-sep", "tan:eta=2.0"])
    def test_anisotropic_runs_stay_feasible(self, toy_objective, potential):
        cfg = small_config(potential=potential, lam=0.05, sigma=0.02, tau=0.001)
        result = train(cfg, toy_objective)
        for worker in result.workers:
            assert result.phi_hat.contains(result.u - worker.z)
        assert result.record.all_finite("F")

    def test_stale_consensus_variant(self, toy_objective):
        result = train(small_config(delta_uses_stale_u=True), toy_objective)
        assert result.record.all_finite("train_loss")

    def test_disjoint_shards(self, toy_objective):
        result = train(small_config(shard_mode="disjoint"), toy_objective)
        assert len(result.workers) == 3

    @pytest.mark.slow
    @pytest.mark.parametrize("potential", ["quad", "log-sep", "tan"])
    def test_quadratic_reaches_consensus_at_the_minimizer(self, potential):
        objective = FunctionObjective(make_test_function("quadratic", 2, center=1.0))
        cfg = TrainerConfig(workers=4, potential=potential, lam=0.05, tau=0.005, sigma=0.02,
                            kappa=0.5, iterations=5000, metrics_every=500, record_timing=False)
        result = train(cfg, objective)
        final = result.record.rows[-1]
        assert final["consensus_gap"] <= 1e-8
        assert final["envelope_grad_norm"] <= 1e-8
        assert_allclose(result.u, [1.0, 1.0], atol=1e-8)

    @pytest.mark.slow
    @pytest.mark.parametrize("potential", ["quad", "cubic", "tan", "tan-sep", "log", "log-sep"])
    def test_two_gaussians_with_every_potential(self, potential):
        data = synth_dataset(DatasetSpec("two_gaussians", 200, 0.5), seed=0)
        objective = DatasetObjective(MlpModel((2, 16, 2)), data)
        cfg = TrainerConfig(workers=4, potential=potential, lam=0.1, batch_size=20, kappa=0.9,
                            iterations=2000, metrics_every=500, record_timing=False)
        result = train(cfg, objective)
        final = result.record.rows[-1]
        assert final["train_error"] <= 0.05
        assert final["consensus_gap"] <= 0.1
        assert result.infinite_evaluations == 0

    def test_final_row_always_carries_the_envelope_measure(self):
        objective = FunctionObjective(make_test_function("quadratic", 1))
        cfg = TrainerConfig(workers=2, lam=0.5, tau=0.1, sigma=0.1, kappa=0.5, iterations=7,
                            metrics_every=5)
        column = train(cfg, objective, initial=[1.0]).record.column("envelope_grad_norm")
        assert column[:2] == [None, None]
        assert column[2] is not None

    def test_default_config_has_no_timing(self, toy_objective):
        cfg = TrainerConfig(workers=2, batch_size=5, iterations=10, metrics_every=5)
        assert not cfg.record_timing
        assert all(v is None for v in train(cfg, toy_objective).record.column("wall_ms"))

    def test_wrong_initial_size(self, toy_objective):
        with pytest.raises(ArgumentError):
            train(small_config(), toy_objective, initial=np.zeros(3))


class TestObjectiveValue:

    def test_kink_needs_no_gradient(self):
        objective = FunctionObjective(make_test_function("abs", 1))
        metrics = _Metrics(small_config(workers=1), objective, [None], QuadPotential(1), 0.0)
        z = np.zeros(1)
        assert metrics.objective_value(z, [z]) == 0.0
        assert metrics.infinite == 0

    def test_matches_the_loss_of_the_gradient_pass(self, toy_objective, rng):
        shard = np.arange(len(toy_objective.dataset))
        z = 0.3 * rng.standard_normal(toy_objective.n_params)
        metrics = _Metrics(small_config(workers=1), toy_objective, [shard], QuadPotential(z.size), 0.0)
        expected = toy_objective.loss_grad(z, shard)[0]
        assert metrics.objective_value(z, [z]) == pytest.approx(expected, rel=1e-12)
