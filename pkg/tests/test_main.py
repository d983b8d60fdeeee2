import json
import os

import numpy as np
import pandas as pd
import pytest

from src.controllers.portfolio import portfolio_cs
from src.main import EXIT_EMPTY_SET, EXIT_ERROR, EXIT_OK, EXIT_USAGE, _lp_problem, _qp_problem, main
from src.models.portfolio_types import PortfolioInstance
from src.utils.config import parse_config
from src.utils.errors import ConfigError

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data')

INTERSECTION_CFG = """
kind = lp
n = 100
grid_step = 0.05
A =
    -1
    -1
b = -5 -3
c = -1
stochastic = b
V_diag = 1 1
theta_box = {box}
"""

PORTFOLIO_CFG = """
kind = qp
n = 500
alpha = 0.10
grid_step = 0.05
Q =
    1   0.3
    0.3 1
c = 0 0
A_ineq =
    1 0
    0 1
b_ineq = 0 0
A_eq =
    2 3
    1 1
b_eq = 2.5 1
# stacked: vec(A_ineq), b_ineq, vec(A_eq), b_eq, c, vec(Q); R sits in the first row of A_eq
mask = 0 0 0 0  0 0  1 0 1 0  0 0  0 0  1 1 1 1
V_diag = 0.5 0.5 0.5 0.5 0.5 0.5
theta_box =
    0 1
    0 1
theta_nonneg = true
theta_eq_A = 1 1
theta_eq_b = 1
"""


def write_config(tmp_path, text, name="problem.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding='utf-8')
    return str(path)


def run(tmp_path, *argv, out="out"):
    out_dir = str(tmp_path / out)
    return main(['--threads', '1', *argv, '--out-dir', out_dir]), out_dir


class TestParser:
    def test_help(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(['--help'])
        assert info.value.code == 0
        assert 'lp-infer' in capsys.readouterr().out

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(['--version'])
        assert info.value.code == 0
        assert capsys.readouterr().out.strip() == 'mpinfer 0.1.0'

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as info:
            main(['lp-infer', 'x.cfg', '--bogus'])
        assert info.value.code == EXIT_USAGE

    def test_missing_command(self):
        with pytest.raises(SystemExit) as info:
            main([])
        assert info.value.code == EXIT_USAGE


class TestLpInfer:
    def test_writes_outputs(self, tmp_path):
        config = write_config(tmp_path, INTERSECTION_CFG.format(box="4.5 5.5"))
        code, out_dir = run(tmp_path, 'lp-infer', config)
        assert code == EXIT_OK
        frame = pd.read_csv(os.path.join(out_dir, 'cs_points.csv'))
        assert list(frame.columns) == ['theta1', 'statistic', 'accepted']
        accepted = frame[frame['accepted'] == 1]['theta1']
        assert accepted.min() == pytest.approx(4.8)
        assert accepted.max() == pytest.approx(5.2)
        # the rejected neighbours on either side are kept
        assert len(frame) == len(accepted) + 2

        with open(os.path.join(out_dir, 'solution.json'), encoding='utf-8') as handle:
            payload = json.load(handle)
        assert payload['status'] == 'Optimal'
        assert payload['theta'] == pytest.approx([5.0])
        assert payload['lambda'] == pytest.approx([1.0, 0.0])
        assert payload['mu'] is None
        lower, upper = payload['projection'][0]
        assert lower == pytest.approx(4.7552, abs=0.006)
        assert upper == pytest.approx(5.2448, abs=0.006)

    def test_outputs_are_reproducible(self, tmp_path):
        config = write_config(tmp_path, INTERSECTION_CFG.format(box="4.5 5.5"))
        _, first = run(tmp_path, 'lp-infer', config, out="first")
        _, second = run(tmp_path, 'lp-infer', config, out="second")
        for name in ('cs_points.csv', 'solution.json'):
            with open(os.path.join(first, name), 'rb') as a, open(os.path.join(second, name), 'rb') as b:
                assert a.read() == b.read()

    def test_empty_set(self, tmp_path):
        config = write_config(tmp_path, INTERSECTION_CFG.format(box="3 4"))
        code, out_dir = run(tmp_path, 'lp-infer', config)
        assert code == EXIT_EMPTY_SET
        assert os.path.exists(os.path.join(out_dir, 'solution.json'))

    def test_bad_dimensions(self, tmp_path):
        config = write_config(tmp_path, INTERSECTION_CFG.format(box="4 6").replace("b = -5 -3", "b = -5 -3 -1"))
        assert run(tmp_path, 'lp-infer', config)[0] == EXIT_ERROR

    def test_wrong_kind(self, tmp_path):
        assert run(tmp_path, 'qp-infer', os.path.join(DATA_DIR, 'sim2_lp.cfg'))[0] == EXIT_ERROR

    def test_missing_config(self, tmp_path):
        assert run(tmp_path, 'lp-infer', str(tmp_path / 'absent.cfg'))[0] == EXIT_ERROR


class TestProblemFields:
    @pytest.mark.parametrize("original, replacement, field", [
        ("b = -5 -3", "b = -5 -3 -1", 'b'),
        ("c = -1", "c = -1 2", 'c'),
    ])
    def test_lp_names_the_mismatched_field(self, original, replacement, field):
        config = parse_config(INTERSECTION_CFG.format(box="4 6").replace(original, replacement))
        with pytest.raises(ConfigError) as info:
            _lp_problem(config)
        assert info.value.field == field

    @pytest.mark.parametrize("original, replacement, field", [
        ("c = 0 0", "c = 0 0 0", 'c'),
        ("A_ineq =\n    1 0\n    0 1", "A_ineq =\n    1 0 0\n    0 1 0", 'A_ineq'),
        ("b_ineq = 0 0", "b_ineq = 0", 'b_ineq'),
        ("b_eq = 2.5 1", "b_eq = 2.5", 'b_eq'),
    ])
    def test_qp_names_the_mismatched_field(self, original, replacement, field):
        text = PORTFOLIO_CFG.replace(original, replacement)
        assert text != PORTFOLIO_CFG
        with pytest.raises(ConfigError) as info:
            _qp_problem(parse_config(text))
        assert info.value.field == field


class TestQpInfer:
    def test_toy_problem(self, tmp_path):
        code, out_dir = run(tmp_path, 'qp-infer', os.path.join(DATA_DIR, 'toy_qp.cfg'))
        assert code == EXIT_OK
        with open(os.path.join(out_dir, 'solution.json'), encoding='utf-8') as handle:
            payload = json.load(handle)
        assert payload['theta'] == pytest.approx([1.0, 1.0])
        frame = pd.read_csv(os.path.join(out_dir, 'cs_points.csv'))
        accepted = frame[frame['accepted'] == 1]
        assert ((accepted['theta1'] - 1.0).abs() < 1e-9).any()

    def test_matches_the_portfolio_path(self, tmp_path):
        code, out_dir = run(tmp_path, 'qp-infer', write_config(tmp_path, PORTFOLIO_CFG))
        assert code == EXIT_OK
        frame = pd.read_csv(os.path.join(out_dir, 'cs_points.csv'))
        from_cli = frame[frame['accepted'] == 1][['theta1', 'theta2']].to_numpy()

        inst = PortfolioInstance(R_hat=[2.0, 3.0], Q_hat=[[1.0, 0.3], [0.3, 1.0]], V_hat=0.5 * np.eye(6),
                                 n=500, mu=2.5)
        cs = portfolio_cs(inst, alpha=0.10, grid_step=0.05, threads=1)
        direct = np.array([theta for theta, _ in cs.accepted])
        np.testing.assert_allclose(from_cli, direct, atol=1e-9)
