import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from aniso.core.errors import DomainError, LineSearchError
from aniso.core.models import make_test_function
from aniso.core.oracle import GridSpec
from aniso.core.potentials import QuadPotential, make_potential, separable
from aniso.core.prox import ProxProblem, prox_grid
from aniso.core.splitting import (AltMinOptions, DenseCoupling, QuadraticTerm, SplittingProblem,
                                  SplittingState, StackedIdentity, StationarityResiduals,
                                  alternate_min, feasibility_line_search, objective, residuals,
                                  u_exact, u_gradient_step, u_median, z_gradient_step)

# ten starts inside the basin of the minimizer at 0
RANDOM_STARTS = np.random.default_rng(2024).uniform(-2.5, 2.5, 10).round(6).tolist()


def consensus_problem(function, potential, lam, M=1, n=1):
    base = make_potential(potential, n)
    return SplittingProblem.distributed([make_test_function(function, n)] * M,
                                        separable(base, M), lam)


def quadratic_instance():
    """f(z) = 1/2 (z - 1)^2, g(u) = 1/2 u^2 + u, quad coupling with lambda = 1."""
    f = make_test_function("quadratic", 1, center=1.0)
    return SplittingProblem(f, DenseCoupling([[1.0]]), QuadPotential(1), 1.0,
                            g=QuadraticTerm([[1.0]], [1.0]))


def quadratic_solution():
    # stationarity in z: 2z - u = 1, in u: 2u - z = -1
    z, u = np.linalg.solve([[2.0, -1.0], [-1.0, 2.0]], [1.0, -1.0])
    return u, z


class TestCouplings:

    def test_stacked_identity_matches_dense(self, rng):
        A = StackedIdentity(2, 3)
        u, w = rng.standard_normal(2), rng.standard_normal(6)
        assert A.shape == (6, 2)
        assert_allclose(A.matvec(u), A.dense() @ u)
        assert_allclose(A.rmatvec(w), A.dense().T @ w)

    def test_raw_matrix_is_wrapped(self):
        prob = SplittingProblem(make_test_function("zero", 2), np.eye(2), QuadPotential(2), 1.0)
        assert isinstance(prob.A, DenseCoupling)
        assert (prob.m, prob.n) == (2, 2)


class TestObjective:

    def test_consensus_with_zero_function(self):
        prob = consensus_problem("zero", "tan", 0.1, M=3)
        assert objective(prob, SplittingState.consensus(prob, [0.4])) == 0.0

    def test_two_blocks(self):
        prob = consensus_problem("zero", "quad", 1.0, M=2)
        assert objective(prob, SplittingState([0.0], [1.0, -1.0])) == pytest.approx(1.0)

    def test_infinite_outside_the_domain(self):
        prob = consensus_problem("zero", "log", 1.0, M=2)
        assert objective(prob, SplittingState([0.0], [0.5, 1.0])) == math.inf


class TestResiduals:

    def test_zero_at_consensus(self):
        prob = consensus_problem("zero", "log-sep", 0.5, M=2, n=2)
        res = residuals(prob, SplittingState.consensus(prob, [0.3, -0.2]))
        assert res.r_u == 0.0 and res.r_z == 0.0

    def test_exact_minimizer_of_a_quadratic_instance(self):
        prob = quadratic_instance()
        u, z = quadratic_solution()
        res = residuals(prob, SplittingState([u], [z]))
        assert res.r_u <= 1e-10 and res.r_z <= 1e-10

    def test_nonsmooth_block_omits_r_z(self):
        prob = consensus_problem("abs", "quad", 1.0)
        assert residuals(prob, SplittingState([0.0], [0.0])).r_z is None

    def test_max_residual_skips_a_missing_r_z(self):
        res = StationarityResiduals(r_u=0.25, r_z=None)
        assert res.known == [0.25]
        assert res.max_residual == 0.25
        assert StationarityResiduals(r_u=0.25, r_z=0.5).max_residual == 0.5

    def test_infeasible_state(self):
        prob = consensus_problem("zero", "log", 1.0)
        with pytest.raises(DomainError):
            residuals(prob, SplittingState([0.0], [1.5]))

    def test_envelope_residual_on_request(self):
        prob = consensus_problem("neg_cos", "tan", 0.1)
        res = residuals(prob, SplittingState.consensus(prob, [0.0]), envelope="local")
        assert res.envelope_residual == pytest.approx(0.0, abs=1e-10)


class TestLineSearch:

    def test_quad_accepts_a_descent_step(self):
        prob = consensus_problem("zero", "quad", 1.0)
        s = SplittingState([0.0], [0.5])
        ls = feasibility_line_search(prob, s, np.array([0.5]), 1.0, block="u")
        assert ls.halvings == 0
        assert ls.value <= objective(prob, s)

    def test_log_overshoot_is_halved(self):
        prob = consensus_problem("zero", "log", 1.0)
        s = SplittingState([0.0], [0.5])
        ls = feasibility_line_search(prob, s, np.array([1.7]), 1.0, block="u")
        assert ls.halvings >= 1 and ls.step < 1.0
        assert abs(ls.point[0] - 0.5) < 1.0
        assert ls.value < objective(prob, s)

    def test_zero_direction(self):
        prob = consensus_problem("neg_cos", "tan", 0.1)
        s = SplittingState([0.2], [0.1])
        ls = feasibility_line_search(prob, s, np.zeros(1), 0.3, block="z")
        assert ls.step == 0.3
        assert ls.value == objective(prob, s)

    def test_ascent_exhausts_the_halvings(self):
        prob = consensus_problem("zero", "quad", 1.0)
        with pytest.raises(LineSearchError):
            feasibility_line_search(prob, SplittingState([0.0], [0.5]), np.array([-1e6]), 1.0, "u")


class TestBlockSteps:

    def test_u_step_averages_with_quad(self):
        prob = consensus_problem("zero", "quad", 1.0, M=3)
        ls = u_gradient_step(prob, SplittingState([0.0], [1.0, 2.0, 3.0]), 1.0 / 3.0)
        assert ls.point[0] == pytest.approx(2.0)

    def test_u_step_inverse_lambda_convention(self):
        prob = consensus_problem("zero", "quad", 0.5, M=3)
        s = SplittingState([0.0], [1.0, 2.0, 3.0])
        assert u_gradient_step(prob, s, 1.0 / 6.0).point[0] == pytest.approx(2.0)
        literal = u_gradient_step(prob, s, 1.0 / 3.0, tau_includes_inv_lambda=True)
        assert literal.point[0] == pytest.approx(2.0)

    def test_u_step_at_consensus_is_still(self):
        prob = consensus_problem("neg_cos", "log", 0.1, M=2)
        s = SplittingState.consensus(prob, [0.3])
        assert u_gradient_step(prob, s, 0.1).point[0] == 0.3

    def test_u_step_log_sep(self):
        prob = consensus_problem("zero", "log-sep", 1.0)
        ls = u_gradient_step(prob, SplittingState([0.0], [0.5]), 0.01)
        assert ls.point[0] == pytest.approx(0.01 * 4.0 / 3.0)

    def test_u_exact_closed_form(self):
        prob = consensus_problem("zero", "quad", 1.0, M=3)
        assert u_exact(prob, SplittingState([0.0], [1.0, 2.0, 6.0]))[0] == pytest.approx(3.0)

    def test_u_exact_newton(self):
        prob = consensus_problem("zero", "log-sep", 1.0, M=2)
        z = np.array([0.5, 0.2])
        u = u_exact(prob, SplittingState([0.0], z))
        assert residuals(prob, SplittingState(u, z)).r_u <= 1e-10

    @pytest.mark.parametrize("blocks,expected", [([[1.0], [2.0], [10.0]], 2.0), ([[4.0]], 4.0),
                                                 ([[1.0], [2.0], [3.0], [100.0]], 2.0)])
    def test_median(self, blocks, expected):
        assert u_median(blocks)[0] == expected

    def test_median_minimizes_the_l1_consensus_cost(self, rng):
        grid = np.linspace(-3.0, 3.0, 6001)
        for _ in range(20):
            z = rng.uniform(-2.0, 2.0, int(rng.integers(2, 9)))
            cost = lambda u: np.sum(np.abs(u - z))
            best_on_grid = min(np.sum(np.abs(grid[:, None] - z[None, :]), axis=1))
            assert cost(u_median(z[:, None])[0]) <= best_on_grid + 1e-12

    def test_z_step_reaches_consensus(self):
        prob = consensus_problem("zero", "quad", 1.0)
        ls = z_gradient_step(prob, SplittingState([0.7], [0.1]), 1.0)
        assert ls.point[0] == pytest.approx(0.7)

    def test_z_step_at_a_stationary_point(self):
        prob = quadratic_instance()
        u, z = quadratic_solution()
        assert z_gradient_step(prob, SplittingState([u], [z]), 0.5).point[0] == pytest.approx(z)

    def test_z_step_does_not_increase_f(self):
        prob = consensus_problem("neg_cos", "tan", 0.1)
        s = SplittingState([0.4], [0.1])
        assert z_gradient_step(prob, s, 0.04).value <= objective(prob, s)


class TestAlternateMin:

    def test_quadratic_instance_converges_to_the_normal_equations(self):
        prob = quadratic_instance()
        state, record = alternate_min(prob, AltMinOptions(tau=0.3, sigma=0.3, tol=1e-10), [2.0])
        u, z = quadratic_solution()
        assert state.u[0] == pytest.approx(u, abs=1e-8)
        assert state.z[0] == pytest.approx(z, abs=1e-8)
        assert record.rows[-1]["r_u"] <= 1e-10

    @pytest.mark.parametrize("potential", ["tan", "log"])
    @pytest.mark.parametrize("start", [0.4] + RANDOM_STARTS)
    def test_neg_cos_stationarity_translates(self, potential, start):
        prob = consensus_problem("neg_cos", potential, 0.1)
        state, record = alternate_min(prob, AltMinOptions(tau=0.05, sigma=0.04), [start])
        final = record.rows[-1]
        assert max(final["r_u"], final["r_z"]) <= 1e-8
        assert final["envelope_residual"] <= 1e-6
        F = record.column("F")
        assert all(b <= a + 1e-12 for a, b in zip(F, F[1:]))

        inner = ProxProblem(make_test_function("neg_cos", 1), make_potential(potential, 1), 0.1)
        h = 1e-3

        def envelope(x):
            return prox_grid(inner, [x], GridSpec.around([x], 0.9, 801, refine=3)).envelope

        u = float(state.u[0])
        assert abs((envelope(u + h) - envelope(u - h)) / (2.0 * h)) <= 1e-4

    @pytest.mark.parametrize("start,target", [(2.0, 1.0), (-2.0, -1.0)])
    def test_double_well_basins(self, start, target):
        prob = consensus_problem("double_well", "quad", 0.05)
        state, record = alternate_min(prob, AltMinOptions(tau=0.05, sigma=0.02), [start])
        assert state.u[0] == pytest.approx(target, abs=1e-6)
        F = record.column("F")
        assert all(b <= a + 1e-12 for a, b in zip(F, F[1:]))

    def test_two_workers_with_exact_u(self):
        prob = consensus_problem("neg_cos", "quad", 0.1, M=2)
        opts = AltMinOptions(sigma=0.04, exact_u=True)
        state, record = alternate_min(prob, opts, [0.5])
        assert abs(state.u[0]) <= 1e-6
        assert record.rows[-1]["step_u"] is None

    def test_envelope_cadence(self):
        prob = consensus_problem("neg_cos", "tan", 0.1)
        opts = AltMinOptions(tau=0.05, sigma=0.04, max_iter=6, envelope_every=3)
        _, record = alternate_min(prob, opts, [0.4])
        logged = [row["iter"] for row in record.rows if row["envelope_residual"] is not None]
        assert logged == [0, 3, 6]
