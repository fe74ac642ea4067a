"""Structured logging for kernel solves and simulation runs.

Events carry numpy values (gains, residuals, step counts) which are turned
into plain Python objects before rendering, so the JSON renderer never sees
an ndarray or an ``np.int64``.
"""

import logging
import sys
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional

import numpy as np
import structlog
from structlog.types import EventDict, Processor

from crane_ft.core.config import settings


def add_run_context(logger: Any, method_name: str, event_dict: EventDict) -> EventDict:
    event_dict["app_name"] = settings.APP_NAME
    event_dict["mode"] = "debug" if settings.DEBUG else "batch"
    return event_dict


def _builtin(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {key: _builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_builtin(item) for item in value]
    return value


def numpy_to_builtin(logger: Any, method_name: str, event_dict: EventDict) -> EventDict:
    """Replace numpy scalars and arrays with their Python equivalents."""
    return {key: _builtin(value) for key, value in event_dict.items()}


def _shared_processors() -> List[Processor]:
    return [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        add_run_context,
        numpy_to_builtin,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
        structlog.processors.format_exc_info,
    ]


def setup_logging() -> None:
    """Route structlog through stdlib logging on stderr.

    stdout is reserved for command output (summaries, the check table).
    Debug mode renders for a terminal, otherwise one JSON object per line.
    """
    level = logging.DEBUG if settings.DEBUG else logging.INFO
    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=level)

    processors = _shared_processors()
    if settings.DEBUG:
        processors.append(structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty()))
    else:
        processors += [
            structlog.processors.dict_tracebacks,
            structlog.processors.JSONRenderer(sort_keys=True),
        ]

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


logger = structlog.get_logger("crane_ft")


def log_error(error: Exception, context: Optional[Dict[str, Any]] = None) -> None:
    """Record a failure; crane-ft errors also log their code."""
    fields: Dict[str, Any] = {
        "error_type": type(error).__name__,
        "error_message": str(error),
        "context": context or {},
    }
    code = getattr(error, "code", None)
    if code is not None:
        fields["code"] = code
    logger.error("error_occurred", **fields)


@contextmanager
def log_stage(stage: str, **fields: Any) -> Iterator[Dict[str, Any]]:
    """Bracket a pipeline stage with start and finish events.

    Keys put into the yielded dict are attached to ``stage_finished``,
    which is emitted even when the stage raises.
    """
    extra: Dict[str, Any] = {}
    logger.info("stage_started", stage=stage, **fields)
    start = time.perf_counter()
    try:
        yield extra
    finally:
        elapsed = time.perf_counter() - start
        logger.info("stage_finished", stage=stage, seconds=round(elapsed, 6), **extra)
