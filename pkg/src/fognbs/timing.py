"""
Wall-time records for solver stages.

Every record carries `metric` and `elapsed_ms` in the message and the run /
eta context in `extra`, so stage timings can be grouped per run from the
log stream.
"""

import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from functools import wraps
from typing import Any

logger = logging.getLogger("fognbs.timing")


def log_timing(
    metric: str,
    elapsed_ms: float,
    *,
    run: int | None = None,
    eta: float | None = None,
    extra: dict[str, Any] | None = None,
    level: int = logging.DEBUG,
) -> None:
    context = {key: value for key, value in (("run", run), ("eta", eta)) if value is not None}
    context.update(extra or {})
    logger.log(level, "%s elapsed_ms=%.1f", metric, elapsed_ms, extra={"extra": context} if context else None)


@contextmanager
def stopwatch(metric: str, level: int = logging.DEBUG, **context: Any) -> Iterator[None]:
    """Time the enclosed block; logged even when it raises."""
    start = time.perf_counter()
    try:
        yield
    finally:
        log_timing(metric, (time.perf_counter() - start) * 1000, level=level, extra=context)


def timed(metric: str, level: int = logging.DEBUG):
    """Decorator form of `stopwatch`, tagging records with the function name."""

    def decorate(fn):
        @wraps(fn)
        def wrapped(*args, **kwargs):
            with stopwatch(metric, level, fn=fn.__qualname__):
                return fn(*args, **kwargs)

        return wrapped

    return decorate
