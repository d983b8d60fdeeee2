import os
import logging
from typing import Optional, Sequence
from threading import Lock

import numpy as np


class InferenceLogger:
    """
    A thread-safe singleton logger for the inference toolkit.

    Only one logger instance exists per process. Console output goes to
    stderr at INFO level; when the MPINFER_LOG_DIR environment variable is
    set, a detailed DEBUG log is also appended to inference_logs.txt in that
    directory. Result files are never written through this class.

    Attributes:
        _instance: The single instance of the logger (singleton pattern)
        _lock: Thread-safe lock for singleton creation
    """

    _instance: Optional['InferenceLogger'] = None
    _lock = Lock()

    def __new__(cls):
        """Creates or returns the singleton instance of InferenceLogger."""
        with cls._lock:
            if cls._instance is None:
                cls._instance = super(InferenceLogger, cls).__new__(cls)
                cls._instance._initialize()
            return cls._instance

    def _initialize(self):
        """
        Sets up the console handler and, if requested, the file handler.

        The file handler uses a more detailed format including timestamps
        and thread information, since grid scans and Monte Carlo runs
        log from worker threads.
        """
        self.logger = logging.getLogger('mpinfer')
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False

        # Clear any existing handlers to prevent duplicates
        self.logger.handlers.clear()

        self.console_handler = logging.StreamHandler()
        self.console_handler.setLevel(logging.INFO)
        self.console_handler.setFormatter(logging.Formatter('[%(levelname)s] %(message)s'))
        self.logger.addHandler(self.console_handler)

        self.logs_dir = os.environ.get('MPINFER_LOG_DIR')
        if self.logs_dir:
            os.makedirs(self.logs_dir, exist_ok=True)
            log_file = os.path.join(self.logs_dir, 'inference_logs.txt')
            file_handler = logging.FileHandler(log_file, mode='a', encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(logging.Formatter(
                '%(asctime)s [%(levelname)s] [%(threadName)s] %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            ))
            self.logger.addHandler(file_handler)

        self.logger.debug("Logging system initialized")

    def set_level(self, level: int) -> None:
        """Adjusts the console verbosity (the file log always keeps DEBUG)."""
        self.console_handler.setLevel(level)

    def log_solver_event(self, solver: str, status: str, details: str = ""):
        """
        Logs the outcome of an LP/QP solve.

        Args:
            solver: Name of the solver ("lp", "qp", "qp-phase1", ...)
            status: Final status of the solve
            details: Additional context such as iteration counts (optional)
        """
        message = f"{solver}: {status}"
        if details:
            message += f" - {details}"
        self.logger.debug(message)

    def log_profile(self, theta: Sequence[float], statistic: float, piece: Sequence[str]):
        """Logs one profiled test statistic evaluation."""
        theta_str = ', '.join(f'{t:.6g}' for t in np.asarray(theta, dtype=float))
        piece_str = ''.join(piece) if piece else '-'
        self.logger.debug(f"Profile at theta=({theta_str}): statistic={statistic:.6g} piece={piece_str}")

    def log_grid_progress(self, done: int, total: int):
        """
        Logs progress of a grid scan.

        Args:
            done: Number of grid points evaluated so far
            total: Total number of grid points
        """
        self.logger.info(f"Grid scan: {done}/{total} points evaluated")

    def log_replication(self, design: str, completed: int, total: int, coverage: float):
        """
        Logs Monte Carlo progress for a simulation design.

        Args:
            design: Design label (e.g. "1a, n=100")
            completed: Replications finished
            total: Replications requested
            coverage: Running empirical coverage
        """
        self.logger.info(f"Design {design}: {completed}/{total} replications, coverage {coverage:.3f}")

    def log_output(self, path: str):
        """Logs that a result file was written."""
        self.logger.info(f"Wrote {path}")

    def log_error(self, error_msg: str):
        """
        Logs errors with the active stack trace, if any.

        Args:
            error_msg: The error message to log
        """
        self.logger.error(error_msg, exc_info=True)

    def log_warning(self, warning_msg: str):
        """
        Logs warnings.

        Used for non-fatal conditions such as dropped input rows or a weight
        iteration that hit its sweep limit.

        Args:
            warning_msg: The warning message to log
        """
        self.logger.warning(warning_msg)

    def log_info(self, message: str):
        """Logs a plain informational message."""
        self.logger.info(message)
