import logging
from concurrent.futures import ThreadPoolExecutor

from aniso.core.errors import ArgumentError, StepFailureError
from aniso.utils.logger import ErrorCollector, ProgressLogger, setup_logger


class TestProgressLogger:

    def test_concurrent_updates_are_all_counted(self):
        progress = ProgressLogger(8000, "sweep")

        def work(_):
            for _ in range(1000):
                progress.update()

        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(work, range(8)))
        assert progress.current == 8000

    def test_zero_total(self):
        progress = ProgressLogger(0, "empty")
        progress.update()
        progress.complete()
        assert progress.current == 1


class TestErrorCollector:

    def test_counts_failures_from_pool_threads(self):
        errors = ErrorCollector()
        with ThreadPoolExecutor(max_workers=4) as pool:
            list(pool.map(lambda i: errors.add_error(f"run {i}", ArgumentError("bad", run=i)),
                          range(40)))
        assert errors.get_error_count() == 40
        assert {e["type"] for e in errors.errors} == {"ArgumentError"}

    def test_summary_goes_to_the_log_file(self, tmp_path):
        log_file = tmp_path / "logs" / "aniso.log"
        setup_logger(log_file=str(log_file))
        errors = ErrorCollector()
        for i in range(5):
            errors.add_error(f"run {i}", StepFailureError("backstop", worker=i))
        errors.log_summary()
        for handler in logging.getLogger("aniso").handlers:
            handler.flush()
        text = log_file.read_text(encoding="utf-8")
        assert "Total failed runs: 5" in text
        assert "StepFailureError: 5 occurrences" in text
        assert "... and 2 more" in text
