import logging
import os
from logging import Logger
from logging.handlers import RotatingFileHandler

import pytz

from pathctl.helpers.logger import ZonedFormatter

EVENTS_LEVEL_NUM = 38
EVENTS_LOGGER_NAME = "pathctl.event"
EVENTS_FILE = "events.log"
DEFAULT_LOG_BACKUP_COUNT = 10


def close_events_logger() -> Logger:
    """Detaches and closes the file handlers of the events logger; later events go nowhere."""
    logger = logging.getLogger(EVENTS_LOGGER_NAME)
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)
    return logger


def setup_events_logger(full_path, events_retention_size) -> Logger:
    """Routes run events into <full_path>/events.log, replacing the file of any earlier run."""
    logging.addLevelName(EVENTS_LEVEL_NUM, "EVENT")

    logger = close_events_logger()
    logger.setLevel(EVENTS_LEVEL_NUM)
    logger.propagate = False

    os.makedirs(full_path, exist_ok=True)
    file_handler = RotatingFileHandler(
        os.path.join(full_path, EVENTS_FILE),
        maxBytes=events_retention_size,
        backupCount=DEFAULT_LOG_BACKUP_COUNT,
    )
    fmt = "%(asctime)s | %(levelname)s | %(message)s"
    try:
        formatter = ZonedFormatter(fmt, zone=os.environ.get("PATHCTL_LOG_TZ", "UTC"))
    except pytz.UnknownTimeZoneError:
        formatter = ZonedFormatter(fmt)
    file_handler.setFormatter(formatter)
    file_handler.setLevel(EVENTS_LEVEL_NUM)
    logger.addHandler(file_handler)
    return logger


def log_event(message: str) -> None:
    """Writes one line to the events log of the current run, if one is open."""
    logger = logging.getLogger(EVENTS_LOGGER_NAME)
    if logger.handlers:
        logger.log(EVENTS_LEVEL_NUM, message)
