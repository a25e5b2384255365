"""
Logging setup shared by the CLI and the dashboard
"""
import logging

from rich.logging import RichHandler

from config.config import LOG_LEVEL


def setup_logging(level: str = LOG_LEVEL) -> None:
    """Install a rich handler on the root logger (idempotent)"""
    root = logging.getLogger()
    root.setLevel(level.upper())
    if any(isinstance(handler, RichHandler) for handler in root.handlers):
        return
    handler = RichHandler(rich_tracebacks=True, show_path=False)
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    root.addHandler(handler)
