import numpy as np
import pytest

from conftest import intersection_bounds, two_by_two_lp
from src.controllers.kkt_builder import (build_lp_system, build_qp_system, eval_moments, lp_coefficients,
                                         solution_nuisance)
from src.controllers.lp_solver import solve_lp
from src.controllers.portfolio import estimated_coefficients, qp_problem
from src.controllers.qp_solver import solve_qp
from src.models.portfolio_types import PortfolioInstance
from src.models.programs import LpProblem
from src.utils.errors import DimensionMismatch, EmptyMoments


def three_asset_instance(mu=2.5):
    return PortfolioInstance(R_hat=[2.0, 2.5, 3.5], Q_hat=[[0.6, 0.2, 0.3], [0.2, 0.3, 0.2], [0.3, 0.2, 0.5]],
                             V_hat=np.eye(12), n=200, mu=mu)


class TestIntersectionBoundsSystem:
    def test_partition(self, sim1):
        _, _, sys = sim1
        assert sys.moment_labels == ('primal[0]', 'primal[1]')
        assert [sys.rows[r].label for r in sys.constraint_rows] == ['dual[0]']
        assert sys.df == 2
        assert [(p.lambda_index, p.slack_kind, p.slack_index) for p in sys.complementarity_pairs] == \
            [(0, 's', 0), (1, 's', 1)]
        assert not sys.weight_depends_on_lambda

    def test_moments_at_the_maximum(self, sim1):
        _, est, sys = sim1
        g, G = eval_moments(sys, est, [5.0], [1.0, 0.0], [0.0, 2.0])
        np.testing.assert_allclose(g, [0.0, 0.0])
        # derivative with respect to b, which enters the rows with a minus sign
        np.testing.assert_allclose(G, -np.eye(2))
        np.testing.assert_allclose(G @ est.V_stochastic @ G.T, np.eye(2))

    def test_dimension_mismatch(self, sim1):
        _, est, sys = sim1
        with pytest.raises(DimensionMismatch):
            eval_moments(sys, est, [5.0, 1.0], [1.0, 0.0], [0.0, 2.0])


class TestTwoByTwoSystem:
    def test_all_rows_are_moments(self, sim2):
        _, _, sys = sim2
        assert sys.df == 4
        assert sys.constraint_rows == ()
        assert sys.n_lambda == 4
        assert sum(p.slack_kind == 'theta' for p in sys.complementarity_pairs) == 2
        assert sys.weight_depends_on_lambda

    def test_zero_at_truth(self, sim2):
        _, est, sys = sim2
        g, _ = eval_moments(sys, est, [2.0, 1.0], [5 / 3, 4 / 3, 0.0, 0.0], [0.0, 0.0])
        np.testing.assert_allclose(g, np.zeros(4), atol=1e-12)

    def test_linear_in_b(self):
        _, est, sys = two_by_two_lp(b=(4.1, 1.0))
        g, _ = eval_moments(sys, est, [2.0, 1.0], [5 / 3, 4 / 3, 0.0, 0.0], [0.0, 0.0])
        np.testing.assert_allclose(g, [-0.1, 0.0, 0.0, 0.0], atol=1e-12)

    def test_exact_at_solver_optimum(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            problem, est, sys = two_by_two_lp(b=(4.0 + rng.normal(0, 0.2), 1.0 + rng.normal(0, 0.2)),
                                              c=(3.0 + rng.normal(0, 0.2), 2.0 + rng.normal(0, 0.2)))
            solution = solve_lp(problem).require_optimal()
            lam, slack = solution_nuisance(sys, solution)
            g, _ = eval_moments(sys, est, solution.theta, lam, slack)
            assert np.abs(g).max() <= 1e-8

    def test_jacobian_matches_finite_differences(self, sim2):
        _, est, sys = sim2
        rng = np.random.default_rng(4)
        step = 1e-6
        for _ in range(10):
            theta, lam, slack = rng.normal(size=2), rng.normal(size=4), rng.normal(size=2)
            _, G = eval_moments(sys, est, theta, lam, slack)
            for position, column in enumerate(sys.stochastic_columns):
                bump = np.zeros(est.point.size)
                bump[column] = step
                up, _ = eval_moments(sys, est.with_point(est.point + bump), theta, lam, slack)
                down, _ = eval_moments(sys, est.with_point(est.point - bump), theta, lam, slack)
                np.testing.assert_allclose((up - down) / (2 * step), G[:, position], atol=1e-6)

    def test_partition_is_complete(self, sim2):
        _, _, sys = sim2
        assert len(sys.moment_rows) + len(sys.constraint_rows) == len(sys.rows) == 4


def test_all_constant_coefficients_have_no_moments():
    problem = LpProblem(A=[[1.0]], b=[1.0], c=[1.0])
    est = lp_coefficients(problem, (False, False, False), np.zeros((0, 0)), 10)
    with pytest.raises(EmptyMoments):
        build_lp_system(problem, est)


class TestPortfolioSystem:
    def test_structure(self):
        inst = three_asset_instance()
        sys = build_qp_system(qp_problem(inst), estimated_coefficients(inst))
        assert sys.df == 1 + 3
        assert sys.moment_labels == ('eq[0]', 'dual[0]', 'dual[1]', 'dual[2]')
        assert [sys.rows[r].label for r in sys.constraint_rows] == ['eq[1]']
        assert all(p.slack_kind == 'theta' for p in sys.complementarity_pairs)
        assert [p.slack_index for p in sys.complementarity_pairs] == [0, 1, 2]
        assert sys.equality_multiplier_indices == (3, 4)
        assert sys.n_slack == 0

    def test_jacobian_blocks(self):
        inst = three_asset_instance()
        est = estimated_coefficients(inst)
        sys = build_qp_system(qp_problem(inst), est)
        theta = np.array([0.2, 0.5, 0.3])
        lam = np.array([0.0, 0.0, 0.0, 0.7, -0.4])
        _, G = eval_moments(sys, est, theta, lam, np.zeros(0))
        columns = list(sys.stochastic_columns)
        r_columns = [columns.index(est.block('A_eq').index(0, j)) for j in range(3)]
        np.testing.assert_allclose(G[0, r_columns], theta)
        np.testing.assert_allclose(G[1:, r_columns], 0.7 * np.eye(3))
        for j in range(3):
            q_columns = [columns.index(est.block('Q').index(j, l)) for l in range(3)]
            np.testing.assert_allclose(G[1 + j, q_columns], -theta)

    def test_exact_at_efficient_weights(self):
        inst = three_asset_instance()
        est = estimated_coefficients(inst)
        sys = build_qp_system(qp_problem(inst), est)
        solution = solve_qp(qp_problem(inst)).require_optimal()
        lam, slack = solution_nuisance(sys, solution)
        g, _ = eval_moments(sys, est, solution.theta, lam, slack)
        assert np.abs(g).max() <= 1e-8
