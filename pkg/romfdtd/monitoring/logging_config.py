"""
Structured logging for solver runs (structlog).

Events carry the bound run context (scenario, scheme, region) and numpy
values from the numerical code. Output goes to stderr; stdout is reserved
for CSV and JSON reports.
"""
import logging
import os
import sys
from typing import Any, Mapping, Optional

import numpy as np
import structlog
from structlog.types import EventDict, Processor

# Arrays longer than this are logged as a shape summary
MAX_LOGGED_ARRAY = 8


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        if value.size <= MAX_LOGGED_ARRAY:
            return value.tolist()
        return f"<{value.dtype} array {value.shape}>"
    return value


def numpy_to_builtin(_logger: Any, _method: str, event_dict: EventDict) -> EventDict:
    """Turn numpy scalars and small arrays into JSON-serializable values."""
    return {key: _plain(value) for key, value in event_dict.items()}


def _renderer(environment: str) -> list[Processor]:
    if environment == "development":
        return [
            structlog.dev.ConsoleRenderer(
                colors=sys.stderr.isatty(),
                exception_formatter=structlog.dev.plain_traceback,
            )
        ]
    # batch runs on clusters
    return [structlog.processors.dict_tracebacks, structlog.processors.JSONRenderer()]


def configure_logging(log_level: Optional[str] = None) -> None:
    """
    Configure structlog and the stdlib root logger.

    Args:
        log_level: DEBUG, INFO, WARNING, ERROR or CRITICAL (LOG_LEVEL env var when None)
    """
    level_name = (log_level or os.getenv("LOG_LEVEL", "INFO")).upper()
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, level_name, logging.INFO),
        force=True,
    )

    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        numpy_to_builtin,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]
    processors += _renderer(os.getenv("ENVIRONMENT", "development"))

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str) -> Any:
    return structlog.get_logger(name)


class LogContext:
    """
    Bind run context to every event inside the block. Nested blocks
    restore the outer values on exit.

    Example:
        with LogContext(scenario="cavity", region="r1"):
            logger.info("assembling fine system")
    """

    def __init__(self, **context):
        self.context = context
        self._tokens: Mapping[str, Any] = {}

    def __enter__(self):
        self._tokens = structlog.contextvars.bind_contextvars(**self.context)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        structlog.contextvars.reset_contextvars(**self._tokens)


def clear_run_context() -> None:
    structlog.contextvars.clear_contextvars()
