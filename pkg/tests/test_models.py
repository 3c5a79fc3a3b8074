import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from aniso.core.errors import ArgumentError, DomainError
from aniso.core.models import (Dataset, DatasetObjective, DatasetSpec, MlpModel, load_params,
                               make_test_function, mlp_loss_grad, save_params, shard_dataset,
                               split_dataset, synth_dataset, testfn_eval)
from aniso.core.oracle import finite_diff_gradient


class TestTestFunctions:

    def test_abs(self):
        f = make_test_function("abs")
        value, grad = testfn_eval(f, [-3.0])
        assert value == 3.0 and grad[0] == -1.0
        value, grad = testfn_eval(f, [0.0])
        assert value == 0.0 and grad is None

    def test_neg_cos(self):
        value, grad = testfn_eval(make_test_function("neg-cos"), [0.0])
        assert value == -1.0 and grad[0] == 0.0

    def test_double_well(self):
        value, grad = testfn_eval(make_test_function("double_well"), [1.0])
        assert value == 0.0 and grad[0] == 0.0

    def test_two_point_indicator(self):
        f = make_test_function("two_point_indicator")
        assert f.value([0.0]) == 0.0 and f.value([1.0]) == 0.0
        assert f.value([0.5]) == math.inf
        assert not f.is_smooth_at([0.0])

    def test_gradient_at_a_kink_raises(self):
        with pytest.raises(DomainError):
            make_test_function("abs", 2).gradient([0.0, 1.0])

    @pytest.mark.parametrize("name,dimension", [("neg_cos", 2), ("double_well", 3),
                                                ("rosenbrock_2d", 2), ("quadratic", 2)])
    def test_gradients_match_finite_differences(self, name, dimension, rng):
        f = make_test_function(name, dimension)
        for _ in range(50):
            z = rng.uniform(-1.5, 1.5, dimension)
            assert_allclose(f.gradient(z), finite_diff_gradient(f.value, z), rtol=1e-6, atol=1e-6)

    def test_hessian_of_rosenbrock(self, rng):
        f = make_test_function("rosenbrock_2d")
        z = rng.uniform(-1.0, 1.0, 2)
        fd = np.column_stack([finite_diff_gradient(lambda x: f.gradient(x)[i], z) for i in range(2)])
        assert_allclose(f.hessian(z), fd, rtol=1e-5, atol=1e-4)

    def test_lower_bounds(self):
        assert make_test_function("double_well").bounded_below
        assert not make_test_function("neg_quadratic").bounded_below

    def test_unknown_name(self):
        with pytest.raises(ArgumentError):
            make_test_function("sombrero")


class TestMlp:

    def test_uniform_softmax_at_zero(self):
        model = MlpModel((2, 3, 2), nu=0.5)
        loss, grad = mlp_loss_grad(model, np.zeros(model.n_params), [((1.0, -2.0), 1)])
        assert loss == pytest.approx(math.log(2.0))
        assert grad.shape == (model.n_params,)

    def test_duplicated_sample_has_the_same_gradient(self, rng):
        model = MlpModel((2, 4, 2))
        z = rng.standard_normal(model.n_params)
        single = mlp_loss_grad(model, z, [((0.3, -0.7), 0)])
        double = mlp_loss_grad(model, z, [((0.3, -0.7), 0), ((0.3, -0.7), 0)])
        assert double[0] == pytest.approx(single[0])
        assert_allclose(double[1], single[1])

    def test_gradient_matches_finite_differences(self, rng):
        model = MlpModel((2, 5, 3), nu=0.01)
        z = 0.5 * rng.standard_normal(model.n_params)
        X = rng.standard_normal((8, 2))
        y = rng.integers(0, 3, 8)
        _, grad = model.loss_grad(z, X, y)
        fd = finite_diff_gradient(lambda x: model.loss_grad(x, X, y)[0], z)
        assert np.linalg.norm(grad - fd) <= 1e-4 * np.linalg.norm(grad)

    def test_loss_matches_the_gradient_pass(self, rng):
        model = MlpModel((2, 5, 3), nu=0.01)
        z = rng.standard_normal(model.n_params)
        X = rng.standard_normal((8, 2))
        y = rng.integers(0, 3, 8)
        assert model.loss(z, X, y) == pytest.approx(model.loss_grad(z, X, y)[0], rel=1e-12)

    def test_flatten_layout(self):
        model = MlpModel((2, 3, 1))
        z = np.arange(model.n_params, dtype=float)
        (W1, b1), (W2, b2) = model.unflatten(z)
        assert W1.shape == (3, 2) and b1.shape == (3,)
        assert_array_equal(W1[0], [0.0, 1.0])
        assert_array_equal(b1, [6.0, 7.0, 8.0])
        assert model.layer_param_sizes == (9, 4)
        assert_array_equal(model.flatten(model.unflatten(z)), z)

    def test_label_out_of_range(self):
        model = MlpModel((2, 2))
        with pytest.raises(ArgumentError):
            model.loss_grad(np.zeros(model.n_params), [[0.0, 0.0]], [2])

    def test_empty_batch(self):
        model = MlpModel((2, 2))
        with pytest.raises(ArgumentError):
            mlp_loss_grad(model, np.zeros(model.n_params), [])


class TestDatasets:

    def test_noise_free_points_sit_on_the_means(self):
        d = synth_dataset(DatasetSpec("two_gaussians", 4, 0.0), seed=0)
        assert sorted(d.labels.tolist()) == [0, 0, 1, 1]
        for x, h in zip(d.inputs, d.labels):
            assert_array_equal(x, np.full(2, 2.0 * h - 1.0))

    @pytest.mark.parametrize("kind", ["two_gaussians", "two_moons"])
    def test_deterministic(self, kind):
        a = synth_dataset(DatasetSpec(kind, 50, 0.2), seed=9)
        b = synth_dataset(DatasetSpec(kind, 50, 0.2), seed=9)
        assert_array_equal(a.inputs, b.inputs)
        assert_array_equal(a.labels, b.labels)

    def test_balanced_classes(self):
        d = synth_dataset(DatasetSpec("two_moons", 7, 0.1), seed=1)
        assert np.bincount(d.labels).tolist() == [3, 4]

    def test_linear_baseline_separates_two_gaussians(self):
        d = synth_dataset(DatasetSpec("two_gaussians", 200, 0.3), seed=1)
        model = MlpModel((2, 2))
        z = np.zeros(model.n_params)
        for _ in range(300):
            _, grad = model.loss_grad(z, d.inputs, d.labels)
            z -= 0.5 * grad
        assert model.error_rate(z, d.inputs, d.labels) <= 0.05

    def test_too_small(self):
        with pytest.raises(ArgumentError):
            synth_dataset(DatasetSpec(n=1), seed=0)

    def test_csv_round_trip(self, tmp_path):
        d = synth_dataset(DatasetSpec("two_moons", 10, 0.1), seed=2)
        d.to_csv(tmp_path / "data.csv")
        back = Dataset.from_csv(tmp_path / "data.csv")
        assert_array_equal(back.inputs, d.inputs)
        assert_array_equal(back.labels, d.labels)

    def test_split(self):
        d = synth_dataset(DatasetSpec(n=40), seed=0)
        train, test = split_dataset(d, 0.25, seed=0)
        assert len(train) == 30 and len(test) == 10
        assert split_dataset(d, 0.0, seed=0) == (d, None)


class TestSharding:

    def test_full_overlap(self):
        d = synth_dataset(DatasetSpec(n=12), seed=0)
        shards = shard_dataset(d, 4, "full_overlap")
        assert len(shards) == 4
        for s in shards:
            assert_array_equal(s, np.arange(12))

    def test_disjoint_partition(self):
        d = synth_dataset(DatasetSpec(n=10), seed=0)
        shards = shard_dataset(d, 3, "disjoint")
        assert [len(s) for s in shards] == [4, 3, 3]
        assert_array_equal(np.sort(np.concatenate(shards)), np.arange(10))

    def test_disjoint_needs_enough_samples(self):
        d = synth_dataset(DatasetSpec(n=2), seed=0)
        with pytest.raises(ArgumentError):
            shard_dataset(d, 3, "disjoint")

    def test_unknown_mode(self):
        d = synth_dataset(DatasetSpec(n=4), seed=0)
        with pytest.raises(ArgumentError):
            shard_dataset(d, 2, "round_robin")


class TestObjectives:

    def test_dataset_objective_batches(self, toy_objective):
        indices = np.array([0, 3, 5])
        loss, grad = toy_objective.loss_grad(np.zeros(toy_objective.n_params), indices)
        assert loss == pytest.approx(math.log(2.0))
        assert toy_objective.layer_shapes == (12, 10)

    @pytest.mark.parametrize("suffix", [".csv", ".bin"])
    def test_params_round_trip(self, tmp_path, suffix, rng):
        z = rng.standard_normal(17)
        save_params(tmp_path / f"params{suffix}", z)
        assert_array_equal(load_params(tmp_path / f"params{suffix}"), z)
