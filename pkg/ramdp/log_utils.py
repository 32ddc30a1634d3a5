import logging
import os
import sys
from logging.handlers import TimedRotatingFileHandler
from pathlib import Path

from .config_loader import CFG, get_base_dir

APP_LOG_FILE = "ramdp.log"
DEFAULT_LOG_DIR = "logs"
DEFAULT_LEVEL = "INFO"


def _logging_cfg():
    return CFG.get("logging", {})


def get_log_dir():
    configured_dir = _logging_cfg().get("log_dir", DEFAULT_LOG_DIR)
    if os.path.isabs(configured_dir):
        return Path(configured_dir)
    return Path(get_base_dir()) / configured_dir


def ensure_log_dir():
    log_dir = get_log_dir()
    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir


def get_log_level(level=None):
    if level is not None:
        return level
    name = str(_logging_cfg().get("level", DEFAULT_LEVEL)).upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


def configure_logging(level=None, log_to_file=True):
    log_formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')
    logger = logging.getLogger('Ramdp')
    logger.setLevel(get_log_level(level))
    logger.handlers.clear()
    logger.propagate = False

    if log_to_file:
        log_file = ensure_log_dir() / APP_LOG_FILE
        file_handler = TimedRotatingFileHandler(
            log_file,
            when="midnight",
            interval=1,
            backupCount=7,
            encoding="utf-8",
        )
        file_handler.setFormatter(log_formatter)
        logger.addHandler(file_handler)

    # stdout carries command results (values, tables), so the console log goes to stderr
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(log_formatter)
    logger.addHandler(console_handler)

    return logger
