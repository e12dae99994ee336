"""
Logging configuration for the NLS-GI engine
Console and rotating file logs plus a run ledger
"""

import logging
import logging.handlers
import os
import sys
from typing import Any, Dict, Optional

from nlsgi.core.config import settings


def setup_logging(level: Optional[str] = None, log_dir: Optional[str] = None):
    """Setup application logging and the run ledger"""

    level_name = (level or settings.LOG_LEVEL).upper()
    directory = log_dir or settings.LOG_DIR
    os.makedirs(directory, exist_ok=True)

    # Configure root logger
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, level_name, logging.INFO))

    # Clear existing handlers
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    # Console handler
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(getattr(logging, level_name, logging.INFO))
    console_handler.setFormatter(logging.Formatter(settings.LOG_FORMAT))
    root_logger.addHandler(console_handler)

    detailed = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"
    )

    # File handler for general logs
    file_handler = logging.handlers.RotatingFileHandler(
        os.path.join(directory, "nlsgi.log"),
        maxBytes=10 * 1024 * 1024,  # 10MB
        backupCount=5,
    )
    file_handler.setLevel(logging.INFO)
    file_handler.setFormatter(detailed)
    root_logger.addHandler(file_handler)

    # Error file handler
    error_handler = logging.handlers.RotatingFileHandler(
        os.path.join(directory, "error.log"),
        maxBytes=10 * 1024 * 1024,  # 10MB
        backupCount=5,
    )
    error_handler.setLevel(logging.ERROR)
    error_handler.setFormatter(detailed)
    root_logger.addHandler(error_handler)

    ledger = logging.getLogger("ledger")
    for handler in list(ledger.handlers):
        ledger.removeHandler(handler)
        handler.close()

    if settings.LEDGER_ENABLED:
        ledger_handler = logging.handlers.RotatingFileHandler(
            os.path.join(directory, "ledger.log"),
            maxBytes=10 * 1024 * 1024,  # 10MB
            backupCount=10,
        )
        ledger_handler.setLevel(logging.INFO)
        ledger_handler.setFormatter(logging.Formatter("%(asctime)s - LEDGER - %(message)s"))
        ledger.setLevel(logging.INFO)
        ledger.addHandler(ledger_handler)
        ledger.propagate = False

    logging.getLogger("uvicorn").setLevel(logging.INFO)
    logging.getLogger("uvicorn.access").setLevel(logging.WARNING)

    logging.info("Logging system initialized")
    if settings.LEDGER_ENABLED:
        logging.info("Run ledger enabled")


class RunLedgerLogger:
    """Records what each run did: config, artifacts, refusals and failures"""

    def __init__(self, name: str):
        self.logger = logging.getLogger(name)
        self.ledger = logging.getLogger("ledger")

    def log_run_start(self, command: str, config_hash: str, details: Optional[Dict[str, Any]] = None):
        if settings.LEDGER_ENABLED:
            self.ledger.info(f"RUN_START - Command: {command}, Config: {config_hash}")
            if details:
                self.ledger.info(f"Details: {details}")

    def log_artifact(self, kind: str, path: str):
        if settings.LEDGER_ENABLED:
            self.ledger.info(f"ARTIFACT - Kind: {kind}, Path: {path}")

    def log_gate_refusal(self, min_abs_a: float, zero_count: int):
        if settings.LEDGER_ENABLED:
            self.ledger.warning(f"GATE_REFUSAL - min|a|: {min_abs_a:.3e}, Zeros: {zero_count}")
        self.logger.warning(f"Soliton-free gate refused: min|a| = {min_abs_a:.3e}, zero count = {zero_count}")

    def log_numerical_failure(self, stage: str, details: str):
        if settings.LEDGER_ENABLED:
            self.ledger.error(f"NUMERICAL_FAILURE - Stage: {stage}, Details: {details}")
        self.logger.error(f"Numerical failure in {stage}: {details}")

    def log_run_end(self, command: str, exit_code: int):
        if settings.LEDGER_ENABLED:
            self.ledger.info(f"RUN_END - Command: {command}, Exit: {exit_code}")


def get_ledger_logger(name: str) -> RunLedgerLogger:
    """Get run ledger logger instance"""
    return RunLedgerLogger(name)
