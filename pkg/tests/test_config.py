import os

import numpy as np
import pytest

from src.utils.config import DEFAULT_ALPHA, load_config, parse_config, parse_entries
from src.utils.errors import ConfigError

DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'data')

MINIMAL_LP = """
kind = lp
n = 50
A =
    -1
    -1
b = -5 -3
c = -1
stochastic = b
V_diag = 1 1
"""


def expect_error(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


class TestEntries:
    def test_blocks_and_comments(self):
        entries = parse_entries("a = 1 2  # trailing\n# whole line\nM =\n  1 2\n  3 4\nb = x\n")
        assert entries == {'a': '1 2', 'M': [[1.0, 2.0], [3.0, 4.0]], 'b': 'x'}

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as info:
            parse_entries("a = 1\na = 2\n")
        assert info.value.field == 'a'

    def test_indented_row_without_block(self):
        with pytest.raises(ConfigError):
            parse_entries("  1 2\n")

    def test_missing_equals(self):
        with pytest.raises(ConfigError) as info:
            parse_entries("kind lp\n")
        assert info.value.field == 'line 1'


class TestParseConfig:
    def test_minimal_lp(self):
        config = parse_config(MINIMAL_LP)
        assert config.kind == 'lp'
        assert config.n == 50
        assert config.alpha == DEFAULT_ALPHA
        assert config.grid_step is None
        np.testing.assert_array_equal(config.array('A'), [[-1.0], [-1.0]])
        np.testing.assert_array_equal(config.array('b'), [-5.0, -3.0])
        np.testing.assert_array_equal(config.V, np.eye(2))
        assert config.stochastic_spec() == ('b',)
        assert not config.nonneg

    def test_sample_files(self):
        lp = load_config(os.path.join(DATA_DIR, 'sim2_lp.cfg'))
        assert lp.nonneg and lp.theta_nonneg is True
        assert lp.stochastic == ('A', 'b', 'c')
        assert lp.theta_box == ((0.0, 4.0), (0.0, 3.0))
        qp = load_config(os.path.join(DATA_DIR, 'toy_qp.cfg'))
        assert qp.kind == 'qp'
        np.testing.assert_array_equal(qp.V, [[1.0, 0.2], [0.2, 1.0]])

    def test_mask(self):
        config = parse_config(MINIMAL_LP.replace("stochastic = b", "mask = 0 0 1 1 0"))
        assert config.stochastic_spec() == (False, False, True, True, False)

    def test_theta_nonneg_list(self):
        config = parse_config(MINIMAL_LP + "theta_nonneg = 0\n")
        assert config.theta_nonneg == (0,)

    def test_covariance_file(self, tmp_path):
        (tmp_path / "v.txt").write_text("2 0.5\n0.5 1\n", encoding='utf-8')
        path = tmp_path / "p.cfg"
        path.write_text(MINIMAL_LP.replace("V_diag = 1 1", "V_file = v.txt"), encoding='utf-8')
        np.testing.assert_array_equal(load_config(str(path)).V, [[2.0, 0.5], [0.5, 1.0]])

    @pytest.mark.parametrize("replace, field", [
        ("kind = lp", "kind"),
        ("n = 50", "n"),
        ("c = -1", "c"),
        ("stochastic = b", "stochastic"),
        ("V_diag = 1 1", "V"),
    ])
    def test_missing_keys(self, replace, field):
        expect_error(MINIMAL_LP.replace(replace, ""), field)

    @pytest.mark.parametrize("extra, field", [
        ("alpha = 1.5", "alpha"),
        ("grid_step = 0", "grid_step"),
        ("threads = 0", "threads"),
        ("Q = 1", "Q"),
        ("V = 1", "V"),
        ("theta_box = 0 1 2", "theta_box"),
        ("nonneg = maybe", "nonneg"),
        ("n2 = 3", "n2"),
    ])
    def test_invalid_values(self, extra, field):
        expect_error(MINIMAL_LP + extra + "\n", field)

    def test_bad_number(self):
        expect_error(MINIMAL_LP.replace("b = -5 -3", "b = -5 x"), "b")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as info:
            load_config(str(tmp_path / "absent.cfg"))
        assert info.value.field == 'config'
