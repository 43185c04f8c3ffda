"""
Logging setup for the mediator market engine
Provides file and console logging with rotation
"""

import logging
import logging.handlers
import os
import sys
from typing import Optional, TextIO

LOGGER_NAME = "MediatorMarket"
LOG_FILE_NAME = "mediator_market.log"
LOG_FILE_MAX_BYTES = 10 * 1024 * 1024
LOG_FILE_BACKUPS = 5

FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
CONSOLE_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


class Logger:
    """
    Owns the handlers of the MediatorMarket logger. Library modules log
    through child loggers and inherit whatever is configured here.
    """

    def __init__(self, log_directory: Optional[str] = "./logs", log_level: str = "INFO",
                 console_stream: Optional[TextIO] = None):
        self.log_directory = log_directory
        self.log_level = getattr(logging, log_level.upper(), logging.INFO)
        self.console_stream = console_stream
        self.logger = logging.getLogger(LOGGER_NAME)
        self._configure()

    def _file_handler(self) -> logging.Handler:
        os.makedirs(self.log_directory, exist_ok=True)
        handler = logging.handlers.RotatingFileHandler(
            os.path.join(self.log_directory, LOG_FILE_NAME),
            maxBytes=LOG_FILE_MAX_BYTES,
            backupCount=LOG_FILE_BACKUPS,
            encoding="utf-8",
        )
        handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
        return handler

    def _console_handler(self) -> logging.Handler:
        # stdout carries reports
        handler = logging.StreamHandler(self.console_stream or sys.stderr)
        handler.setFormatter(logging.Formatter(CONSOLE_FORMAT, datefmt="%H:%M:%S"))
        return handler

    def _configure(self) -> None:
        self.logger.setLevel(self.log_level)
        self.logger.handlers.clear()

        handlers = [self._console_handler()]
        if self.log_directory:
            handlers.insert(0, self._file_handler())
        for handler in handlers:
            handler.setLevel(self.log_level)
            self.logger.addHandler(handler)

        self.logger.debug(f"Logging to {self.log_directory or 'console only'} "
                          f"at {logging.getLevelName(self.log_level)}")

    def get_logger(self) -> logging.Logger:
        return self.logger

    def info(self, message: str) -> None:
        self.logger.info(message)

    def warning(self, message: str) -> None:
        self.logger.warning(message)

    def debug(self, message: str) -> None:
        self.logger.debug(message)

    def log_scenario_loaded(self, source: str, num_slots: int, num_advertisers: int,
                            fitness: Optional[float]) -> None:
        """Log a scenario that passed validation"""
        mediator = f"f={fitness:.6g}" if fitness is not None else "no mediator"
        self.logger.info(f"SCENARIO: {source} - K={num_slots}, advertisers={num_advertisers}, {mediator}")

    def log_outcome(self, label: str, revenue: float, efficiency: float,
                    mediator_slot: Optional[int] = None) -> None:
        """Log the headline numbers of one market outcome"""
        slot = mediator_slot if mediator_slot is not None else "-"
        self.logger.info(f"OUTCOME_{label.upper()}: R={revenue:.12g}, E={efficiency:.12g}, l={slot}")

    def log_invariant_check(self, check: str, passed: bool, details: str = "") -> None:
        """Log an invariant check; failures are warnings"""
        status = "PASS" if passed else "FAIL"
        message = f"INVARIANT {check}: {status}"
        if details:
            message += f" - {details}"

        if passed:
            self.logger.debug(message)
        else:
            self.logger.warning(message)

    def log_campaign_progress(self, done: int, total: int, failures: int) -> None:
        """Log progress of a verification campaign"""
        self.logger.info(f"CAMPAIGN: {done}/{total} evaluated, {failures} failing")
