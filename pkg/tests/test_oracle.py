import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from aniso.core.errors import ArgumentError, EmptyFeasibleError, StencilError
from aniso.core.models import make_test_function
from aniso.core.oracle import (GridSpec, evaluate_grid, finite_diff_gradient, finite_diff_jacobian,
                               grid_argmin, local_convexity_constants)
from aniso.core.potentials import (CubicPotential, LogPotential, QuadPotential, make_potential,
                                   parse_potential)


class TestFiniteDifferences:

    def test_half_squared_norm(self):
        grad = finite_diff_gradient(lambda x: 0.5 * float(x @ x), [3.0], h=1e-6)
        assert grad[0] == pytest.approx(3.0, abs=1e-6)

    def test_constant(self):
        assert_allclose(finite_diff_gradient(lambda x: 7.0, [1.0, 2.0]), [0.0, 0.0])

    def test_agrees_with_tan_gradient(self):
        p = make_potential("tan", 2)
        assert_allclose(finite_diff_gradient(p.value, [0.3, 0.4]), p.gradient([0.3, 0.4]), atol=1e-5)

    def test_infinite_stencil(self):
        with pytest.raises(StencilError):
            finite_diff_gradient(LogPotential(1).value, [1.0 - 1e-7], h=1e-6)

    def test_jacobian_of_a_linear_map(self):
        M = np.array([[1.0, 2.0], [-3.0, 0.5]])
        assert_allclose(finite_diff_jacobian(lambda x: M @ x, [0.2, -0.1]), M, atol=1e-8)


class TestGridSpec:

    def test_rejects_too_few_points(self):
        with pytest.raises(ArgumentError):
            GridSpec((0.0,), (1.0,), (2,))

    def test_rejects_empty_box(self):
        with pytest.raises(ArgumentError):
            GridSpec((1.0,), (1.0,), (11,))

    def test_point_count_broadcasts(self):
        grid = GridSpec((0.0, 0.0), (1.0, 2.0), 5)
        assert grid.points == (5, 5)
        assert grid.coordinates().shape == (25, 2)

    def test_refined_grid_keeps_the_center(self):
        sub = GridSpec((-2.0,), (2.0,), (401,)).refined_around(np.array([0.123]))
        assert 0.123 in sub.coordinates()[:, 0]


class TestGridArgmin:

    def test_shifted_square(self):
        result = grid_argmin(lambda z: float((z[0] - 1.0) ** 2), GridSpec((-2.0,), (2.0,), (401,)))
        assert len(result.argmins) == 1
        assert result.argmins[0][0] == pytest.approx(1.0, abs=1e-9)
        assert result.min_value == pytest.approx(0.0, abs=1e-15)

    def test_double_well_has_two_minimizers(self):
        f = make_test_function("double_well", 1)
        result = grid_argmin(f.values, GridSpec((-2.0,), (2.0,), (401,)), vectorized=True)
        found = sorted(float(z[0]) for z in result.argmins)
        assert found == pytest.approx([-1.0, 1.0], abs=1e-9)

    def test_huber_prox_objective(self):
        fn = lambda z: abs(z[0]) + 0.5 * (2.0 - z[0]) ** 2
        result = grid_argmin(fn, GridSpec((-1.0,), (3.0,), (4001,), refine=2))
        assert result.argmins[0][0] == pytest.approx(1.0, abs=1e-6)
        assert result.min_value == pytest.approx(1.5, abs=1e-10)

    def test_strictly_convex_quadratic_within_a_cell(self, rng):
        center = rng.uniform(-1.0, 1.0, 2)
        grid = GridSpec((-2.0, -2.0), (2.0, 2.0), (81, 81), refine=1)
        result = grid_argmin(lambda Z: np.sum((Z - center) ** 2, axis=1), grid, vectorized=True)
        assert np.max(np.abs(result.argmins[0] - center)) <= np.max(result.cell)

    def test_all_infinite(self):
        with pytest.raises(EmptyFeasibleError):
            grid_argmin(lambda z: math.inf, GridSpec((0.0,), (1.0,), (11,)))

    def test_boundary_flag(self):
        result = grid_argmin(lambda z: float(z[0]), GridSpec((0.0,), (1.0,), (11,), refine=0))
        assert result.on_boundary

    @pytest.mark.slow
    def test_threads_do_not_change_values(self):
        grid = GridSpec((-1.0, -1.0), (1.0, 1.0), (300, 300))
        fn = lambda Z: np.sin(3.0 * Z[:, 0]) * np.cos(2.0 * Z[:, 1])
        _, serial = evaluate_grid(fn, grid, vectorized=True)
        _, threaded = evaluate_grid(fn, grid, vectorized=True, max_workers=4)
        assert_array_equal(serial, threaded)


class TestLocalConvexity:

    def test_quad(self):
        est = local_convexity_constants(QuadPotential(2), ([-1.0, -1.0], [1.0, 1.0]))
        assert est.mu_hat == pytest.approx(1.0)
        assert est.gamma_hat == pytest.approx(1.0)

    def test_log_is_steepest_at_the_boundary_of_k(self):
        est = local_convexity_constants(LogPotential(1), ([-0.5], [0.5]))
        assert est.mu_hat >= 2.0 - 1e-12
        assert est.gamma_hat == pytest.approx(2.5 / 0.5625)

    def test_pure_cubic_is_not_admissible(self):
        est = local_convexity_constants(CubicPotential(1), ([-0.5], [0.5]))
        assert est.mu_hat == 0.0
        assert not est.admissible

    def test_box_leaving_the_domain(self):
        with pytest.raises(ArgumentError):
            local_convexity_constants(LogPotential(1), ([-2.0], [0.5]))

    @pytest.mark.parametrize("spec", ["quad", "tan", "tan-sep", "log", "log-sep", "cubic:eps=0.1"])
    def test_constants_bound_bregman_and_gradient_growth(self, spec, rng):
        p = parse_potential(spec, 2)
        lower, upper = np.array([-0.5, -0.5]), np.array([0.5, 0.5])
        est = local_convexity_constants(p, (lower, upper))
        assert est.mu_hat > 0.0
        for _ in range(200):
            w, w_prime = rng.uniform(lower, upper), rng.uniform(lower, upper)
            d = float(np.linalg.norm(w_prime - w))
            assert p.bregman(w_prime, w) >= 0.5 * est.mu_hat * d * d * (1.0 - 1e-9)
            growth = float(np.linalg.norm(p.gradient(w_prime) - p.gradient(w)))
            assert growth <= est.gamma_hat * d * (1.0 + 1e-9)


class TestFiniteDifferenceOrder:

    @pytest.mark.parametrize("spec", ["tan", "log"])
    def test_halving_h_quarters_the_error(self, spec):
        p = make_potential(spec, 2)
        w = np.array([0.3, -0.2])
        exact = p.gradient(w)
        coarse = np.linalg.norm(finite_diff_gradient(p.value, w, h=1e-2) - exact)
        fine = np.linalg.norm(finite_diff_gradient(p.value, w, h=5e-3) - exact)
        assert 3.5 <= coarse / fine <= 4.5
