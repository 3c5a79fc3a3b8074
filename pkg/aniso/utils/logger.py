"""Logging setup for the aniso command line."""

import logging
import sys
import threading
from pathlib import Path
from typing import Optional


_logger: Optional[logging.Logger] = None

DETAILED_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logger(verbose: bool = False, log_file: Optional[str] = None) -> logging.Logger:
    """Configure the ``aniso`` logger.

    Library modules log through ``logging.getLogger(__name__)`` and end up
    here. The console only shows warnings unless ``verbose`` is set; the
    optional log file always receives DEBUG records.

    Args:
        verbose: Enable DEBUG output on the console
        log_file: Path of a detailed log file, or None for none

    Returns:
        Configured logger instance
    """
    global _logger

    logger = logging.getLogger('aniso')
    logger.setLevel(logging.DEBUG if verbose or log_file else logging.INFO)
    logger.handlers.clear()

    detailed = logging.Formatter(DETAILED_FORMAT, datefmt='%Y-%m-%d %H:%M:%S')
    simple = logging.Formatter('%(levelname)s: %(message)s')

    if log_file:
        try:
            log_path = Path(log_file)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(log_path, encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(detailed)
            logger.addHandler(file_handler)
        except OSError as e:
            print(f"Warning: cannot open log file {log_file}: {e}", file=sys.stderr)

    console = logging.StreamHandler(sys.stderr)
    if verbose:
        console.setLevel(logging.DEBUG)
        console.setFormatter(detailed)
    else:
        console.setLevel(logging.WARNING)
        console.setFormatter(simple)
    logger.addHandler(console)

    logger.propagate = False

    _logger = logger
    return logger


def get_logger() -> logging.Logger:
    """The application logger, created with defaults on first use."""
    global _logger
    if _logger is None:
        _logger = setup_logger()
    return _logger


class ProgressLogger:
    """Logs progress of a batch of runs at every tenth.

    ``update`` may be called from pool threads.
    """

    def __init__(self, total: int, description: str = "Running"):
        self.total = total
        self.current = 0
        self.description = description
        self.logger = get_logger()
        self._lock = threading.Lock()
        self.logger.info(f"Starting {description}: {total} runs")

    def update(self, increment: int = 1) -> None:
        with self._lock:
            self.current += increment
            current = self.current
        if current % max(1, self.total // 10) == 0 or current == self.total:
            percent = (current / self.total) * 100 if self.total else 100.0
            self.logger.info(f"{self.description}: {current}/{self.total} ({percent:.1f}%)")

    def complete(self) -> None:
        self.logger.info(f"{self.description} completed: {self.current}/{self.total} runs")


class ErrorCollector:
    """Collect failures of individual runs in a sweep."""

    def __init__(self):
        self.errors = []
        self.logger = get_logger()
        self._lock = threading.Lock()

    def add_error(self, item: str, error: Exception) -> None:
        """Record a failed run.

        Args:
            item: Label of the run (for example its configuration)
            error: The exception that ended it
        """
        with self._lock:
            self.errors.append({
                'item': item,
                'error': str(error),
                'type': type(error).__name__,
            })
        self.logger.warning(f"Run {item} failed: {error}")

    def get_error_count(self) -> int:
        return len(self.errors)

    def log_summary(self) -> None:
        """Log failures grouped by exception type, three examples each."""
        if not self.errors:
            return

        self.logger.error(f"Total failed runs: {len(self.errors)}")
        by_type = {}
        for error in self.errors:
            by_type.setdefault(error['type'], []).append(error)

        for error_type, errors in by_type.items():
            self.logger.error(f"  {error_type}: {len(errors)} occurrences")
            for i, error in enumerate(errors[:3]):
                self.logger.error(f"    Example {i + 1}: {error['item']} - {error['error']}")
            if len(errors) > 3:
                self.logger.error(f"    ... and {len(errors) - 3} more")
