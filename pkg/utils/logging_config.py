import logging
import os
from logging.handlers import RotatingFileHandler
from typing import List, Optional


def setup_logging(
    level: str = "INFO",
    log_file: Optional[str] = None,
    max_bytes: int = 10**6,
    backup_count: int = 3,
) -> None:
    """
    Configures logging for the application, writing logs to the console and optionally a rotating file.

    Args:
        level (str): Root log level name (DEBUG, INFO, WARNING, ERROR).
        log_file (Optional[str]): The path to the log file, or None for console only.
        max_bytes (int): The maximum size (in bytes) of the log file before rotation.
        backup_count (int): The number of backup log files to keep.
    """
    numeric_level = logging.getLevelName(level.upper())
    if not isinstance(numeric_level, int):
        raise ValueError(f"Unknown log level '{level}'.")

    handlers: List[logging.Handler] = [logging.StreamHandler()]  # Log to console
    if log_file:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        handlers.append(RotatingFileHandler(log_file, maxBytes=max_bytes, backupCount=backup_count))

    logging.basicConfig(
        level=numeric_level,
        format="%(asctime)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )
