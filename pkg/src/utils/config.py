"""
Problem configuration files for lp-infer and qp-infer.

Format: `key = value` lines with `#` comments. A key whose value is empty
starts a matrix block made of the following indented lines, one row per
line, numbers separated by whitespace:

    A =
        1  2
        1 -1
    b = 4 1
"""

import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import ConfigError

Rows = List[List[float]]

LP_KEYS = {'A', 'b', 'c', 'nonneg'}
QP_KEYS = {'Q', 'c', 'A_ineq', 'b_ineq', 'A_eq', 'b_eq'}
COMMON_KEYS = {'kind', 'n', 'alpha', 'grid_step', 'threads', 'stochastic', 'mask', 'V', 'V_diag', 'V_file',
               'theta_box', 'theta_nonneg', 'theta_eq_A', 'theta_eq_b'}
DEFAULT_ALPHA = 0.05
DEFAULT_GRID_STEP = 0.05


def _numbers(text: str, key: str) -> List[float]:
    try:
        return [float(token) for token in text.replace(',', ' ').split()]
    except ValueError as exc:
        raise ConfigError(key, f"expected numbers, got '{text.strip()}'") from exc


def parse_entries(text: str) -> Dict[str, Union[str, Rows]]:
    """Split config text into raw values (strings) and matrix blocks (lists of rows)."""
    entries: Dict[str, Union[str, Rows]] = {}
    block_key: Optional[str] = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].rstrip()
        if not line.strip():
            continue
        if line[0].isspace():
            if block_key is None:
                raise ConfigError(f"line {number}", "indented row outside a matrix block")
            entries[block_key].append(_numbers(line, block_key))
            continue
        if '=' not in line:
            raise ConfigError(f"line {number}", "expected 'key = value'")
        key, value = (part.strip() for part in line.split('=', 1))
        if not key:
            raise ConfigError(f"line {number}", "missing key")
        if key in entries:
            raise ConfigError(key, f"defined twice (line {number})")
        if value:
            entries[key] = value
            block_key = None
        else:
            entries[key] = []
            block_key = key
    return entries


@dataclass(frozen=True)
class ProblemConfig:
    """A parsed problem file; arrays are validated when the problem is built."""
    kind: str
    n: int
    alpha: float
    grid_step: Optional[float]
    threads: Optional[int]
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)
    nonneg: bool = False
    stochastic: Tuple[str, ...] = ()
    mask: Optional[Tuple[bool, ...]] = None
    V: Optional[np.ndarray] = None
    theta_box: Optional[Tuple[Tuple[float, float], ...]] = None
    theta_nonneg: Union[bool, Tuple[int, ...]] = False
    source: str = ""

    def array(self, key: str) -> Optional[np.ndarray]:
        return self.arrays.get(key)

    def stochastic_spec(self) -> Union[Tuple[str, ...], Tuple[bool, ...]]:
        return self.mask if self.mask is not None else self.stochastic


class _Reader:
    def __init__(self, entries: Dict[str, Union[str, Rows]], base_dir: str):
        self.entries = entries
        self.base_dir = base_dir

    def text(self, key: str) -> Optional[str]:
        value = self.entries.get(key)
        if value is None:
            return None
        if not isinstance(value, str):
            raise ConfigError(key, "expected a single value, got a matrix block")
        return value

    def number(self, key: str, cast, default=None):
        value = self.text(key)
        if value is None:
            return default
        try:
            return cast(value)
        except ValueError as exc:
            raise ConfigError(key, f"cannot read '{value}' as {cast.__name__}") from exc

    def flag(self, key: str) -> bool:
        value = self.text(key)
        if value is None:
            return False
        if value.lower() in ('true', 'yes', '1'):
            return True
        if value.lower() in ('false', 'no', '0'):
            return False
        raise ConfigError(key, f"expected true or false, got '{value}'")

    def matrix(self, key: str) -> Optional[np.ndarray]:
        value = self.entries.get(key)
        if value is None:
            return None
        rows = [_numbers(value, key)] if isinstance(value, str) else value
        if not rows:
            raise ConfigError(key, "empty matrix block")
        if len({len(row) for row in rows}) != 1:
            raise ConfigError(key, "rows have different lengths")
        return np.array(rows, dtype=np.float64)

    def vector(self, key: str) -> Optional[np.ndarray]:
        matrix = self.matrix(key)
        if matrix is None:
            return None
        if matrix.shape[0] > 1 and matrix.shape[1] > 1:
            raise ConfigError(key, f"expected a vector, got a {matrix.shape[0]}x{matrix.shape[1]} matrix")
        return matrix.reshape(-1)

    def matrix_file(self, key: str) -> Optional[np.ndarray]:
        value = self.text(key)
        if value is None:
            return None
        path = value if os.path.isabs(value) else os.path.join(self.base_dir, value)
        if not os.path.exists(path):
            raise ConfigError(key, f"file {path} does not exist")
        try:
            frame = pd.read_csv(path, sep=r'\s+', header=None, comment='#')
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
            raise ConfigError(key, f"cannot read matrix from {path}: {exc}") from exc
        values = frame.apply(pd.to_numeric, errors='coerce').to_numpy(dtype=np.float64)
        if np.any(~np.isfinite(values)):
            raise ConfigError(key, f"{path} contains non-numeric entries")
        return values


def parse_config(text: str, source: str = "<string>") -> ProblemConfig:
    """
    Parse config text.

    Raises:
        ConfigError: with the offending key as its field
    """
    entries = parse_entries(text)
    base_dir = os.path.dirname(os.path.abspath(source)) if source != "<string>" else os.getcwd()
    reader = _Reader(entries, base_dir)

    kind = (reader.text('kind') or '').lower()
    if kind not in ('lp', 'qp'):
        raise ConfigError('kind', f"must be lp or qp, got '{kind}'")
    allowed = COMMON_KEYS | (LP_KEYS if kind == 'lp' else QP_KEYS)
    for key in entries:
        if key not in allowed:
            raise ConfigError(key, f"unknown key for kind={kind}")

    n = reader.number('n', int)
    if n is None or n < 1:
        raise ConfigError('n', "sample size must be a positive integer")
    alpha = reader.number('alpha', float, DEFAULT_ALPHA)
    if not 0.0 < alpha < 1.0:
        raise ConfigError('alpha', f"must lie in (0, 1), got {alpha}")
    grid_step = reader.number('grid_step', float)
    if grid_step is not None and grid_step <= 0.0:
        raise ConfigError('grid_step', f"must be positive, got {grid_step}")
    threads = reader.number('threads', int)
    if threads is not None and threads < 1:
        raise ConfigError('threads', f"must be positive, got {threads}")

    arrays = {}
    for key in ('A', 'Q', 'A_ineq', 'A_eq', 'theta_eq_A'):
        value = reader.matrix(key)
        if value is not None:
            arrays[key] = value
    for key in ('b', 'c', 'b_ineq', 'b_eq', 'theta_eq_b'):
        value = reader.vector(key)
        if value is not None:
            arrays[key] = value
    required = ('A', 'b', 'c') if kind == 'lp' else ('Q', 'c')
    for key in required:
        if key not in arrays:
            raise ConfigError(key, "is required")

    stochastic: Tuple[str, ...] = ()
    mask = None
    if 'mask' in entries:
        mask = tuple(value != 0.0 for value in reader.vector('mask'))
    elif reader.text('stochastic'):
        stochastic = tuple(reader.text('stochastic').replace(',', ' ').split())
    else:
        raise ConfigError('stochastic', "name the estimated blocks with 'stochastic' or give 'mask'")

    sources = [key for key in ('V', 'V_diag', 'V_file') if key in entries]
    if len(sources) != 1:
        raise ConfigError('V', "give exactly one of V, V_diag, V_file")
    if sources[0] == 'V':
        V = reader.matrix('V')
    elif sources[0] == 'V_diag':
        V = np.diag(reader.vector('V_diag'))
    else:
        V = reader.matrix_file('V_file')

    theta_box = None
    box = reader.matrix('theta_box')
    if box is not None:
        if box.shape[1] != 2:
            raise ConfigError('theta_box', "expected one 'lower upper' row per coordinate")
        theta_box = tuple((float(lo), float(hi)) for lo, hi in box)

    theta_nonneg: Union[bool, Tuple[int, ...]] = False
    raw_nonneg = reader.text('theta_nonneg')
    if raw_nonneg is not None:
        if raw_nonneg.lower() in ('true', 'false', 'yes', 'no'):
            theta_nonneg = reader.flag('theta_nonneg')
        else:
            theta_nonneg = tuple(int(v) for v in _numbers(raw_nonneg, 'theta_nonneg'))

    return ProblemConfig(kind=kind, n=n, alpha=alpha, grid_step=grid_step, threads=threads, arrays=arrays,
                         nonneg=reader.flag('nonneg') if kind == 'lp' else False, stochastic=stochastic,
                         mask=mask, V=V, theta_box=theta_box, theta_nonneg=theta_nonneg, source=source)


def load_config(path: str) -> ProblemConfig:
    """
    Raises:
        ConfigError: the file is missing or invalid
    """
    if not os.path.exists(path):
        raise ConfigError('config', f"file {path} does not exist")
    with open(path, encoding='utf-8') as handle:
        return parse_config(handle.read(), source=path)
