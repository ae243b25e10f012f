import logging
import os
from datetime import datetime
from logging import Logger

import pytz
from dotenv import load_dotenv

load_dotenv()


class ZonedFormatter(logging.Formatter):
    def __init__(self, fmt=None, datefmt=None, zone: str = "UTC"):
        super().__init__(fmt, datefmt)
        self.zone = pytz.timezone(zone)

    def formatTime(self, record, datefmt=None):
        ct = datetime.fromtimestamp(record.created, self.zone)
        return ct.strftime(datefmt or "%Y-%m-%d %H:%M:%S")

    def format(self, record):
        # Pad the level name to 5 characters
        record.levelname = f"{record.levelname:<5}"
        return super().format(record)


def setup_logger() -> Logger:
    # Clear any existing handlers to avoid conflicts
    logger = logging.getLogger("pathctl")
    if logger.hasHandlers():
        logger.handlers.clear()

    logger.setLevel(logging.DEBUG)
    logger.propagate = False

    zone = os.environ.get("PATHCTL_LOG_TZ", "UTC")
    try:
        formatter = ZonedFormatter('%(asctime)s - %(filename)s:%(lineno)d [%(levelname)s] %(message)s', zone=zone)
    except pytz.UnknownTimeZoneError:
        formatter = ZonedFormatter('%(asctime)s - %(filename)s:%(lineno)d [%(levelname)s] %(message)s')

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.setLevel(os.environ.get("PATHCTL_LOG_LEVEL", "INFO").upper())
    logger.addHandler(console_handler)

    if zone != formatter.zone.zone:
        logger.warning(f"Unknown timezone {zone} in PATHCTL_LOG_TZ, falling back to UTC")
    return logger


def set_console_level(logger: Logger, level: str) -> None:
    for handler in logger.handlers:
        if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
            handler.setLevel(level.upper())


LOGGER = setup_logger()
