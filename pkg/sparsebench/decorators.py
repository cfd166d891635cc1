from __future__ import annotations

import inspect
import time
from functools import wraps
from typing import Callable

from loguru import logger


def _call_name(func: Callable) -> str:
    params = inspect.signature(func).parameters
    return func.__qualname__ if "self" in params else func.__name__


def timer(r: int | None = 2):
    """
    Log the wall time of each call of the decorated function.

    The message goes to ``logger.debug`` with the elapsed seconds bound as the ``seconds`` extra,
    attributed to the caller's module.

    Args:
        r (int, optional): Decimal places of the reported time. ``None`` keeps full precision. Defaults to 2.

    Example:
        ```python
        >>> @timer()
        ... def run(grid): ...
        ```
    """

    def decorator(func: Callable):
        name = _call_name(func)

        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            result = func(*args, **kwargs)
            elapsed = time.perf_counter() - start
            if r is not None:
                elapsed = round(elapsed, r)
            logger.opt(depth=1).bind(seconds=elapsed).debug(f"'{name}' took {elapsed}s")
            return result

        return wrapper

    return decorator


def retry(
    attempts: int,
    exceptions: tuple[type[BaseException], ...] = (Exception,),
    delay: float = 0,
):
    """
    Call the decorated function again when it raises one of ``exceptions``.

    Useful when a call draws from a live random generator, so a retry sees a fresh sample.
    After ``attempts`` failed calls the last exception propagates; other exceptions propagate
    immediately.

    Args:
        attempts (int): Total number of calls, at least 1.
        exceptions (tuple[type[BaseException], ...], optional): Exceptions that trigger a retry.
        delay (float, optional): Seconds to sleep between calls. Defaults to 0.
    """
    if attempts < 1:
        raise ValueError("Attempts must be greater than 0")

    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs):
            attempt = 1
            while True:
                try:
                    return func(*args, **kwargs)
                except exceptions as e:
                    if attempt == attempts:
                        raise
                    logger.bind(attempt=attempt, attempts=attempts).debug(
                        f"'{func.__name__}' raised {type(e).__name__}: {e}, retrying"
                    )
                    attempt += 1
                    if delay:
                        time.sleep(delay)

        return wrapper

    return decorator


__all__ = ["timer", "retry"]
