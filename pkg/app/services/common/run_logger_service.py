"""
Run Logger Service - Logs exceptions and messages to <run dir>/run_log.csv
"""
import csv
import logging
import threading
import traceback
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Iterator, Optional

from app.config import settings

RUN_LOG_COLUMNS = ["created_at", "level", "logger", "message", "exception"]


class RunLogHandler(logging.Handler):
    """Custom logging handler that appends records to a run's CSV log"""

    def __init__(self, path: Path):
        super().__init__()
        self.path = Path(path)
        self._write_lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists():
            with self.path.open("w", newline="", encoding="utf-8") as f:
                csv.writer(f).writerow(RUN_LOG_COLUMNS)

    def emit(self, record: logging.LogRecord):
        """
        Write log record to the CSV file
        """
        try:
            exception_text = None
            if record.exc_info:
                exception_text = "".join(traceback.format_exception(*record.exc_info))

            self._append_row(
                datetime.fromtimestamp(record.created),
                record.levelname,
                record.name,
                record.getMessage(),
                exception_text,
            )
        except Exception as e:
            # never let the run log break a run
            print(f"Failed to write run log: {e}")
            self.handleError(record)

    def _append_row(self, created_at: datetime, level: str, name: str, message: str, exception: Optional[str]):
        with self._write_lock:
            with self.path.open("a", newline="", encoding="utf-8") as f:
                csv.writer(f).writerow([created_at.isoformat(timespec="seconds"), level, name, message, exception or ""])


class RunLoggerService:
    """Service for per-run audit logs"""

    def __init__(self):
        self._handlers: dict[Path, RunLogHandler] = {}

    @staticmethod
    def log_path(run_dir: Path) -> Path:
        return Path(run_dir) / "run_log.csv"

    def get_handler(self, run_dir: Path) -> RunLogHandler:
        """Get a logging handler for Python's logging framework"""
        key = Path(run_dir)
        if key not in self._handlers:
            handler = RunLogHandler(self.log_path(key))
            handler.setLevel(logging.INFO)
            self._handlers[key] = handler
        return self._handlers[key]

    @contextmanager
    def attached(self, run_dir: Path) -> Iterator[Optional[RunLogHandler]]:
        """Attach the run's handler to the root logger for the duration of a run"""
        if not settings.RUN_LOG_ENABLED:
            yield None
            return

        handler = self.get_handler(run_dir)
        root_logger = logging.getLogger()
        root_logger.addHandler(handler)
        try:
            yield handler
        finally:
            root_logger.removeHandler(handler)
            handler.close()
            self._handlers.pop(Path(run_dir), None)

    def log_message(self, run_dir: Path, level: str, message: str):
        """
        Log a message to the run log without exception

        Args:
            run_dir: results directory of the run
            level: Log level (ERROR, WARNING, INFO, etc.)
            message: Log message
        """
        if not settings.RUN_LOG_ENABLED:
            return
        try:
            self.get_handler(run_dir)._append_row(datetime.now(), level.upper(), "audit", message, None)
        except Exception as e:
            print(f"Failed to log message to run log: {e}")

    def log_exception(self, run_dir: Path, level: str, message: str, exception: Exception):
        """
        Log an exception to the run log

        Args:
            run_dir: results directory of the run
            level: Log level (ERROR, WARNING, INFO, etc.)
            message: Log message
            exception: Exception object
        """
        if not settings.RUN_LOG_ENABLED:
            return
        exception_text = "".join(traceback.format_exception(type(exception), exception, exception.__traceback__))
        try:
            self.get_handler(run_dir)._append_row(datetime.now(), level.upper(), "audit", message, exception_text)
        except Exception as e:
            print(f"Failed to log exception to run log: {e}")


# Singleton instance
run_logger_service = RunLoggerService()
