"""
Logging utilities.
"""
import logging
import os
from typing import Optional

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _level_from_env() -> int:
    """Resolve the default level from LANDMARK_LOG_LEVEL."""
    name = os.getenv("LANDMARK_LOG_LEVEL", "INFO").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


class Logger:
    """
    Application logger.
    """

    def __init__(
        self,
        name: str,
        log_level: Optional[int] = None,
        log_file: Optional[str] = None
    ):
        """
        Initialize the logger.

        Args:
            name: Logger name
            log_level: Logging level (defaults to LANDMARK_LOG_LEVEL, then INFO)
            log_file: Path to the log file (if None, LANDMARK_LOG_FILE or stderr only)
        """
        self._logger = logging.getLogger(name)
        self._logger.setLevel(log_level if log_level is not None else _level_from_env())
        self._logger.propagate = False

        if not self._logger.handlers:
            stream = logging.StreamHandler()
            stream.setFormatter(logging.Formatter(_FORMAT))
            self._logger.addHandler(stream)

            log_file = log_file or os.getenv("LANDMARK_LOG_FILE") or None
            if log_file:
                file_handler = logging.FileHandler(log_file)
                file_handler.setFormatter(logging.Formatter(_FORMAT))
                self._logger.addHandler(file_handler)

    def info(self, message: str) -> None:
        """
        Log an info message.

        Args:
            message: Message to log
        """
        self._logger.info(message)

    def warning(self, message: str) -> None:
        """
        Log a warning message.

        Args:
            message: Message to log
        """
        self._logger.warning(message)

    def error(self, message: str) -> None:
        """
        Log an error message.

        Args:
            message: Message to log
        """
        self._logger.error(message)

    def debug(self, message: str) -> None:
        """
        Log a debug message.

        Args:
            message: Message to log
        """
        self._logger.debug(message)
