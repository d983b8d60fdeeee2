import numpy as np
import pytest
from scipy.optimize import minimize

from conftest import intersection_bounds, two_by_two_lp
from src.controllers.kkt_builder import build_lp_system, eval_moments, lp_coefficients
from src.controllers.mpcc_profiler import enumerate_pieces, minimize_piece, profile_statistic
from src.models.programs import LpProblem
from src.utils.densela import robust_sym_inv
from src.utils.errors import NoFeasiblePiece, PieceLimitExceeded, PreconditionError


def brute_force_sim1(x_bar, V, n, theta):
    """min over s >= 0 with s1 = 0 or s2 = 0 of n g'V^-1 g, g = x_bar - theta + s."""
    W = np.linalg.inv(V)
    a = np.asarray(x_bar, dtype=float) - theta
    best = np.inf
    for zero, free in ((0, 1), (1, 0)):
        s = np.zeros(2)
        s[free] = max(0.0, -a[free] - W[free, zero] * a[zero] / W[free, free])
        g = a + s
        best = min(best, n * g @ W @ g)
    return best


def brute_force_binding_piece(sys, est, theta, centre=(5 / 3, 4 / 3), half_width=2.0, step=0.05):
    """
    Minimum over lambda >= 0 of the statistic with both slacks and the sign
    multipliers at zero: a grid on a box around the duals, then Nelder-Mead.
    """
    def statistic(lam):
        full = np.concatenate([lam, np.zeros(2)])
        g, G = eval_moments(sys, est, theta, full, np.zeros(2))
        return float(est.n * g @ robust_sym_inv(G @ est.V_stochastic @ G.T) @ g)

    axes = [np.arange(max(0.0, centre[i] - half_width), centre[i] + half_width + 1e-12, step) for i in range(2)]
    best_value, best_lam = np.inf, None
    for l1 in axes[0]:
        for l2 in axes[1]:
            value = statistic(np.array([l1, l2]))
            if value < best_value:
                best_value, best_lam = value, np.array([l1, l2])
    refined = minimize(statistic, best_lam, method='Nelder-Mead', bounds=[(0.0, None), (0.0, None)],
                       options={'xatol': 1e-10, 'fatol': 1e-12, 'maxiter': 4000})
    return min(best_value, float(refined.fun))


class TestIntersectionBounds:
    @pytest.mark.parametrize("theta, expected", [(5.0, 0.0), (4.5, 25.0), (5.1, 1.0), (4.9, 1.0)])
    def test_known_values(self, sim1, theta, expected):
        _, est, sys = sim1
        result = profile_statistic(sys, est, [theta])
        assert result.statistic == pytest.approx(expected, abs=1e-8)
        assert result.converged

    def test_active_piece(self, sim1):
        _, est, sys = sim1
        result = profile_statistic(sys, est, [4.5])
        assert result.piece == ('S', 'L')
        np.testing.assert_allclose(result.lambda_star, [1.0, 0.0], atol=1e-9)
        np.testing.assert_allclose(result.s_star, [0.0, 1.5], atol=1e-9)

    def test_one_sweep_per_piece_without_lambda_in_the_weight(self, sim1):
        _, est, sys = sim1
        result = profile_statistic(sys, est, [4.8], warm_start=np.array([1.0, 0.0, 0.0, 2.0]))
        # four pieces, one start each since the weight ignores lambda
        assert result.iterations == 4

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            x_bar = rng.normal([5.0, 3.0], 1.0)
            root = rng.normal(size=(2, 2))
            V = root @ root.T + 0.2 * np.eye(2)
            theta = rng.uniform(x_bar.min() - 1.0, x_bar.max() + 1.0)
            _, est, sys = intersection_bounds(x_bar=x_bar, V=V, n=100)
            result = profile_statistic(sys, est, [theta])
            expected = brute_force_sim1(x_bar, V, 100, theta)
            assert result.statistic == pytest.approx(expected, rel=1e-7, abs=1e-8)

    def test_every_multiplier_is_fixed_infeasible(self):
        problem = LpProblem(A=[[-1.0], [-1.0]], b=[-5.0, -3.0], c=[1.0])
        est = lp_coefficients(problem, ['b'], np.eye(2), 100)
        sys = build_lp_system(problem, est)
        with pytest.raises(NoFeasiblePiece):
            profile_statistic(sys, est, [5.0])

    def test_piece_limit(self):
        problem = LpProblem(A=-np.ones((21, 1)), b=-np.linspace(0.0, 5.0, 21), c=[-1.0])
        est = lp_coefficients(problem, ['b'], np.eye(21), 100)
        sys = build_lp_system(problem, est)
        with pytest.raises(PieceLimitExceeded):
            profile_statistic(sys, est, [5.0])

    def test_theta_shape(self, sim1):
        _, est, sys = sim1
        with pytest.raises(PreconditionError):
            profile_statistic(sys, est, [5.0, 1.0])


class TestTwoByTwo:
    def test_zero_at_truth(self, sim2):
        _, est, sys = sim2
        warm_start = np.array([5 / 3, 4 / 3, 0.0, 0.0, 0.0, 0.0])
        result = profile_statistic(sys, est, [2.0, 1.0], warm_start)
        assert result.statistic == pytest.approx(0.0, abs=1e-8)
        assert result.piece[2:] == ('L', 'L')

    def test_positive_away_from_truth(self, sim2):
        _, est, sys = sim2
        assert profile_statistic(sys, est, [1.0, 1.0]).statistic > 1.0

    def test_theta_pairs_follow_the_coordinate(self, sim2):
        _, _, sys = sim2
        pieces = enumerate_pieces(sys, np.array([0.0, 1.0]))
        assert len(pieces) == 4
        assert all(piece[2:] == ('S', 'L') for piece in pieces)

    def test_negative_paired_coordinate(self, sim2):
        _, est, sys = sim2
        with pytest.raises(PreconditionError):
            profile_statistic(sys, est, [-0.5, 1.0])

    def test_minimum_over_pieces(self, sim2):
        _, est, sys = sim2
        theta = np.array([1.5, 1.0])
        warm_start = np.array([5 / 3, 4 / 3, 0.0, 0.0, 0.0, 0.0])
        values = []
        for piece in enumerate_pieces(sys, theta):
            for start in (None, warm_start):
                values.append(minimize_piece(sys, est, theta, piece, start)[0])
        result = profile_statistic(sys, est, theta, warm_start)
        assert result.statistic == pytest.approx(max(min(values), 0.0), rel=1e-12, abs=1e-12)

    def test_all_multipliers_at_zero_leaves_the_objective(self):
        _, est, sys = two_by_two_lp()
        value, lam, slack, sweeps, converged = minimize_piece(sys, est, np.array([1.0, 0.5]), ('L', 'L', 'L', 'L'))
        # slacks absorb the primal rows; the dual rows are stuck at -c
        assert value == pytest.approx(100 * (3.0 ** 2 + 2.0 ** 2), rel=1e-9)
        np.testing.assert_allclose(lam, np.zeros(4))
        np.testing.assert_allclose(slack, [2.0, 0.5], atol=1e-9)
        assert converged

    @pytest.mark.parametrize("theta", [(2.0, 1.0), (1.95, 1.0), (2.0, 0.95), (2.05, 1.02)])
    def test_binding_piece_matches_brute_force_with_perturbed_objective(self, theta):
        _, est, sys = two_by_two_lp(c=(3.1, 1.9))
        assert sys.weight_depends_on_lambda
        theta = np.array(theta)
        piece = ('S', 'S', 'L', 'L')
        expected = brute_force_binding_piece(sys, est, theta)
        values = [minimize_piece(sys, est, theta, piece, start)[0]
                  for start in (None, np.array([5 / 3, 4 / 3, 0.0, 0.0, 0.0, 0.0]))]
        assert min(values) == pytest.approx(expected, rel=1e-4, abs=1e-6)
