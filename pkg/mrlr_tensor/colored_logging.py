"""
Colored console logging for the mrlr command line.

All log output goes to stderr so that stdout stays free for 'info' reports and
CSV written to '-'.
"""

import logging
import sys
from typing import Optional, TextIO


class ColoredFormatter(logging.Formatter):
    """
    Logging formatter that adds ANSI colors by level and by message kind.

    Errors and warnings are always colored by level; INFO and DEBUG messages
    are colored when they look like a success, a progress step, a highlighted
    result or a section header.
    """

    COLORS = {
        'DEBUG': '\033[36m',      # Cyan
        'INFO': '\033[32m',       # Green
        'WARNING': '\033[33m',    # Yellow
        'ERROR': '\033[31m',      # Red
        'CRITICAL': '\033[35m',   # Magenta
    }

    SPECIAL_COLORS = {
        'success': '\033[92m',    # Bright Green
        'progress': '\033[94m',   # Bright Blue
        'highlight': '\033[96m',  # Bright Cyan
    }

    RESET = '\033[0m'
    BOLD = '\033[1m'

    SUCCESS_INDICATORS = ('converged', 'wrote', 'saved', 'finished', 'done', '✓')
    PROGRESS_INDICATORS = ('fitting', 'sweeping', 'reading', 'loading', 'sampling', 'refinement', '→')
    HIGHLIGHT_INDICATORS = ('nfe', 'params', 'stage', 'best', '•')

    def __init__(self, fmt: Optional[str] = None, use_colors: bool = True, stream: Optional[TextIO] = None):
        """
        Args:
            fmt: Log format string (defaults to "LEVEL: message")
            use_colors: Set False to never emit color codes
            stream: Stream the handler writes to; colors are used only if it is a TTY
        """
        super().__init__(fmt or "%(levelname)s: %(message)s")
        stream = stream if stream is not None else sys.stderr
        self.use_colors = use_colors and hasattr(stream, 'isatty') and stream.isatty()

    def format(self, record: logging.LogRecord) -> str:
        formatted = super().format(record)
        if not self.use_colors:
            return formatted

        message = record.getMessage().lower()
        if record.levelname in ('ERROR', 'CRITICAL', 'WARNING'):
            return f"{self.COLORS[record.levelname]}{formatted}{self.RESET}"

        if self._is_section_message(message):
            return f"{self.BOLD}{self.SPECIAL_COLORS['highlight']}{formatted}{self.RESET}"
        if any(word in message for word in self.SUCCESS_INDICATORS):
            return f"{self.SPECIAL_COLORS['success']}{self.BOLD}{formatted}{self.RESET}"
        if any(word in message for word in self.PROGRESS_INDICATORS):
            return f"{self.SPECIAL_COLORS['progress']}{formatted}{self.RESET}"
        if any(word in message for word in self.HIGHLIGHT_INDICATORS):
            return f"{self.SPECIAL_COLORS['highlight']}{formatted}{self.RESET}"
        if record.levelname == 'DEBUG':
            return f"{self.COLORS['DEBUG']}{formatted}{self.RESET}"
        return formatted

    @staticmethod
    def _is_section_message(message: str) -> bool:
        return '=' * 10 in message


def setup_colored_logging(level: int = logging.INFO, use_colors: bool = True, stream: Optional[TextIO] = None) -> None:
    """
    Route all log records at ``level`` and above to stderr (or ``stream``).

    Existing root handlers are replaced, so repeated calls (one per CLI
    invocation in the tests) do not duplicate output.
    """
    stream = stream if stream is not None else sys.stderr
    handler = logging.StreamHandler(stream)
    handler.setFormatter(ColoredFormatter(use_colors=use_colors, stream=stream))
    handler.setLevel(level)

    root_logger = logging.getLogger()
    for existing in root_logger.handlers[:]:
        root_logger.removeHandler(existing)
    root_logger.addHandler(handler)
    root_logger.setLevel(level)


def get_colored_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def log_success(logger: logging.Logger, message: str) -> None:
    logger.info(f"✓ {message}")


def log_progress(logger: logging.Logger, message: str) -> None:
    logger.info(f"→ {message}")


def log_highlight(logger: logging.Logger, message: str) -> None:
    logger.info(f"• {message}")


def log_section(logger: logging.Logger, section_name: str) -> None:
    separator = "=" * 60
    logger.info(separator)
    logger.info(f"  {section_name.upper()}")
    logger.info(separator)
