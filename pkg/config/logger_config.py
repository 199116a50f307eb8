import logging
import os
import time
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler, TimedRotatingFileHandler
from pathlib import Path


DEFAULT_LOG_DIR = os.environ.get("VCTR_LOG_DIR", "logs")
DEFAULT_CONSOLE_LEVEL = os.environ.get("VCTR_LOG_LEVEL", "INFO").upper()

DETAILED_FORMAT = (
    "%(asctime)s - %(name)s - %(levelname)s - "
    "[%(filename)s:%(lineno)d] - %(funcName)s - %(message)s"
)
RUN_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
ERROR_FORMAT = (
    "%(asctime)s - %(process)d - %(levelname)s - "
    "[%(filename)s:%(lineno)d] - %(message)s"
)


class Logger:
    """Application logger: console plus detailed, per-run and error files."""

    def __init__(
        self,
        log_dir=DEFAULT_LOG_DIR,
        console_level=DEFAULT_CONSOLE_LEVEL,
        file_level=logging.DEBUG,
        app_name="visual_ctr",
    ):
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)

        self.logger = logging.getLogger(app_name)
        for handler in self.logger.handlers[:]:
            self.logger.removeHandler(handler)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False

        self._console = logging.StreamHandler()
        self._add_handler(self._console, console_level, logging.Formatter("%(message)s"))

        # per-step losses only reach this file
        self._add_handler(
            RotatingFileHandler(
                self.log_dir / "detailed_logs.log",
                maxBytes=10 * 1024 * 1024,
                backupCount=2,
                encoding="utf-8",
            ),
            file_level,
            logging.Formatter(DETAILED_FORMAT),
        )

        runs = TimedRotatingFileHandler(
            self.log_dir / "processing.log",
            when="midnight",
            backupCount=7,
            encoding="utf-8",
        )
        runs.suffix = "%Y-%m-%d"
        self._add_handler(runs, logging.INFO, logging.Formatter(RUN_FORMAT))

        self._add_handler(
            RotatingFileHandler(
                self.log_dir / "errors.log",
                maxBytes=5 * 1024 * 1024,
                backupCount=1,
                encoding="utf-8",
            ),
            logging.ERROR,
            logging.Formatter(ERROR_FORMAT),
        )

        self.logger.debug("Logging to %s", self.log_dir.resolve())

    def _add_handler(self, handler, level, formatter):
        handler.setLevel(level)
        handler.setFormatter(formatter)
        self.logger.addHandler(handler)

    def set_console_level(self, level):
        self._console.setLevel(level)

    @contextmanager
    def log_duration(self, what):
        """Log the start and wall-clock duration of a block at INFO."""
        self.logger.info("%s: started", what)
        start = time.perf_counter()
        try:
            yield
        except Exception:
            self.logger.error("%s: failed after %.1fs", what, time.perf_counter() - start)
            raise
        self.logger.info("%s: finished in %.1fs", what, time.perf_counter() - start)


_instance = Logger()
logger = _instance.logger
set_console_level = _instance.set_console_level
log_duration = _instance.log_duration
