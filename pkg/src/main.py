import argparse
import logging
import os
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .controllers import experiments, portfolio
from .controllers.inference import ConfidenceSetBuilder, default_theta_box
from .controllers.kkt_builder import (build_lp_system, build_qp_system, lp_coefficients, lp_layout,
                                      qp_coefficients, qp_layout, solution_nuisance, stacked_mask)
from .controllers.lp_solver import solve_lp
from .controllers.qp_solver import solve_qp_with_retry
from .models.confidence import ConfidenceSet, ConfidenceSpec, ThetaConstraints
from .models.programs import LpProblem, QpProblem
from .utils.config import DEFAULT_GRID_STEP, ProblemConfig, load_config
from .utils.errors import ConfigError, EmptySet, InferenceError, InvalidProblem
from .utils.logger import InferenceLogger

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY_SET = 2
EXIT_USAGE = 64


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage code instead of 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(
        prog='mpinfer',
        description='Confidence sets for estimators defined by linear and quadratic programs.',
    )
    parser.add_argument('--version', action='version', version=f"mpinfer {__version__}")
    parser.add_argument('--threads', type=int, default=None, help='worker threads (default: all cores)')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help='log debug messages')
    verbosity.add_argument('--quiet', action='store_true', help='log warnings and errors only')
    commands = parser.add_subparsers(dest='command', metavar='{lp-infer,qp-infer,simulate,portfolio}')
    commands.required = True

    for name, kind in (('lp-infer', 'LP'), ('qp-infer', 'QP')):
        command = commands.add_parser(name, help=f'confidence set for a {kind}-defined estimator')
        command.add_argument('config', help='problem configuration file')
        command.add_argument('--out-dir', default='results', help='directory for cs_points.csv and solution.json')

    simulate = commands.add_parser('simulate', help='Monte Carlo coverage study')
    simulate.add_argument('--design', choices=sorted(experiments.DESIGNS) + ['all'], default='all')
    simulate.add_argument('--n', type=int, nargs='+', default=list(experiments.STANDARD_SAMPLE_SIZES))
    simulate.add_argument('--reps', type=int, default=1000)
    simulate.add_argument('--alpha', type=float, default=0.05)
    simulate.add_argument('--seed', type=int, default=42)
    simulate.add_argument('--variance', type=float, default=None, help='override the sampling variance')
    simulate.add_argument('--out', default=None, help='coverage table CSV')

    application = commands.add_parser('portfolio', help='confidence set for long-only minimum-variance weights')
    source = application.add_mutually_exclusive_group(required=True)
    source.add_argument('--data', help='CSV with header date,<ticker1>,...')
    source.add_argument('--fixture', action='store_true', help='use the generated calibration panel')
    application.add_argument('--mu', type=float, required=True, help='target return in percent')
    application.add_argument('--alpha', type=float, default=0.10)
    application.add_argument('--grid-step', type=float, default=0.01)
    application.add_argument('--annualize-factor', type=float, default=1.0)
    application.add_argument('--retest', type=float, nargs='+', default=None,
                             help='previously chosen weights to test against the new data')
    application.add_argument('--out-dir', default='results')
    return parser


def _theta_constraints(config: ProblemConfig, k: int) -> ThetaConstraints:
    if config.theta_nonneg is True:
        nonneg: Tuple[int, ...] = tuple(range(k))
    else:
        nonneg = tuple(config.theta_nonneg or ())
    try:
        return ThetaConstraints(k=k, nonneg=nonneg, eq_A=config.array('theta_eq_A'), eq_b=config.array('theta_eq_b'))
    except InvalidProblem as exc:
        raise ConfigError('theta_eq_A', str(exc)) from exc


def _coefficients(config: ProblemConfig, problem, layout, make):
    field = 'mask' if config.mask is not None else 'stochastic'
    try:
        mask = stacked_mask(layout(problem), config.stochastic_spec())
    except InvalidProblem as exc:
        raise ConfigError(field, str(exc)) from exc
    if config.V is None or config.V.shape != (int(mask.sum()), int(mask.sum())):
        shape = None if config.V is None else config.V.shape
        raise ConfigError('V', f"covariance is {shape} for {int(mask.sum())} stochastic entries")
    try:
        return make(problem, tuple(mask), config.V, config.n)
    except InvalidProblem as exc:
        raise ConfigError('V', str(exc)) from exc


def _check_extent(field_name: str, values: Optional[np.ndarray], axis: int, expected: int, what: str) -> None:
    found = 0 if values is None else values.shape[axis]
    if found != expected:
        raise ConfigError(field_name, f"has {found} {what}, expected {expected}")


def _lp_problem(config: ProblemConfig) -> LpProblem:
    A = config.array('A')
    m, k = A.shape
    _check_extent('b', config.array('b'), 0, m, "entries")
    _check_extent('c', config.array('c'), 0, k, "entries")
    try:
        return LpProblem(A=A, b=config.array('b'), c=config.array('c'), nonneg=config.nonneg)
    except InvalidProblem as exc:
        raise ConfigError('A', str(exc)) from exc


def _qp_problem(config: ProblemConfig) -> QpProblem:
    Q = config.array('Q')
    k = Q.shape[0]
    _check_extent('Q', Q, 1, k, "columns")
    _check_extent('c', config.array('c'), 0, k, "entries")
    for matrix_key, vector_key in (('A_ineq', 'b_ineq'), ('A_eq', 'b_eq')):
        rows = config.array(matrix_key)
        if rows is not None:
            _check_extent(matrix_key, rows, 1, k, "columns")
        _check_extent(vector_key, config.array(vector_key), 0, 0 if rows is None else rows.shape[0], "entries")
    try:
        return QpProblem(Q=Q, c=config.array('c'),
                         A_ineq=config.array('A_ineq'), b_ineq=config.array('b_ineq'),
                         A_eq=config.array('A_eq'), b_eq=config.array('b_eq'))
    except InvalidProblem as exc:
        raise ConfigError('Q', str(exc)) from exc


def _infer(config: ProblemConfig, problem, solution, sys, est, out_dir: str, threads: Optional[int]) -> int:
    logger = InferenceLogger()
    theta_hat = np.asarray(solution.theta)
    k = theta_hat.shape[0]
    box = config.theta_box or default_theta_box(theta_hat, est)
    if len(box) != k:
        raise ConfigError('theta_box', f"{len(box)} rows for {k} coordinates")
    try:
        spec = ConfidenceSpec(alpha=config.alpha, df=sys.df, theta_box=box,
                              grid_step=config.grid_step or DEFAULT_GRID_STEP,
                              constraints=_theta_constraints(config, k), threads=threads or config.threads)
    except InvalidProblem as exc:
        raise ConfigError('theta_box', str(exc)) from exc

    warm_start = np.concatenate(solution_nuisance(sys, solution))
    builder = ConfidenceSetBuilder(sys, est, spec, warm_start)
    cs = builder.scan()
    projection = () if cs.is_empty else tuple(builder.projection_interval(j, cs) for j in range(k))
    _write_outputs(cs, solution, out_dir, [f"theta{j + 1}" for j in range(k)], None, projection)
    if cs.is_empty:
        raise EmptySet(f"no grid point accepted; smallest statistic {cs.min_statistic:.6g} exceeds "
                       f"the critical value {cs.critical_value:.6g}", cs.min_statistic)
    for j, (lower, upper) in enumerate(projection):
        logger.log_info(f"theta{j + 1}: [{lower:.6g}, {upper:.6g}]")
    return EXIT_OK


def _write_outputs(cs: ConfidenceSet, solution, out_dir: str, names: Sequence[str], mu: Optional[float],
                   projection=()) -> None:
    portfolio.ensure_dir(out_dir)
    portfolio.write_cs_points(cs, os.path.join(out_dir, 'cs_points.csv'), names)
    portfolio.write_solution(os.path.join(out_dir, 'solution.json'), solution, mu, cs.alpha,
                             cs.critical_value, projection)


def cmd_lp_infer(args) -> int:
    config = load_config(args.config)
    if config.kind != 'lp':
        raise ConfigError('kind', "lp-infer needs kind = lp")
    problem = _lp_problem(config)
    est = _coefficients(config, problem, lp_layout, lp_coefficients)
    solution = solve_lp(problem).require_optimal()
    sys = build_lp_system(problem, est)
    return _infer(config, problem, solution, sys, est, args.out_dir, args.threads)


def cmd_qp_infer(args) -> int:
    config = load_config(args.config)
    if config.kind != 'qp':
        raise ConfigError('kind', "qp-infer needs kind = qp")
    problem = _qp_problem(config)
    est = _coefficients(config, problem, qp_layout, qp_coefficients)
    solution = solve_qp_with_retry(problem).require_optimal()
    sys = build_qp_system(problem, est)
    return _infer(config, problem, solution, sys, est, args.out_dir, args.threads)


def cmd_simulate(args) -> int:
    ids = list(experiments.DESIGNS.values()) if args.design == 'all' else [experiments.DESIGNS[args.design]]
    designs = [experiments.make_design(design_id, n, args.reps, args.alpha, args.seed, args.variance)
               for design_id in ids for n in args.n]
    table = experiments.coverage_table(designs, args.threads)
    if args.out:
        experiments.write_coverage_csv(table, args.out)
    print(experiments.format_coverage_table(table))
    return EXIT_OK


def cmd_portfolio(args) -> int:
    panel = portfolio.make_fixture_panel() if args.fixture else portfolio.ingest_csv(args.data)
    inst = portfolio.estimate_instance(panel, args.mu, args.annualize_factor)
    if args.retest is not None:
        accepted, statistic = portfolio.retest_weights(inst, args.retest, args.alpha)
        print(f"{'accepted' if accepted else 'rejected'} statistic={statistic:.10g}")
        return EXIT_OK
    solution = portfolio.efficient_weights(inst).require_optimal()
    cs = portfolio.portfolio_cs(inst, args.alpha, args.grid_step, args.threads)
    _write_outputs(cs, solution, args.out_dir, inst.tickers, inst.mu)
    if cs.is_empty:
        raise EmptySet(f"no weight vector accepted; smallest statistic {cs.min_statistic:.6g}", cs.min_statistic)
    return EXIT_OK


COMMANDS = {
    'lp-infer': cmd_lp_infer,
    'qp-infer': cmd_qp_infer,
    'simulate': cmd_simulate,
    'portfolio': cmd_portfolio,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    logger = InferenceLogger()
    if args.verbose:
        logger.set_level(logging.DEBUG)
    elif args.quiet:
        logger.set_level(logging.WARNING)
    else:
        logger.set_level(logging.INFO)

    try:
        return COMMANDS[args.command](args)
    except EmptySet as exc:
        logger.log_warning(str(exc))
        return EXIT_EMPTY_SET
    except InferenceError as exc:
        logger.log_error(f"Error: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
