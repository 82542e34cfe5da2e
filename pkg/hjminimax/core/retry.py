"""Retry utilities for Newton shooting."""
from functools import wraps
from typing import Callable, TypeVar

from tenacity import (
    Retrying,
    stop_after_attempt,
    wait_none,
    retry_if_exception_type,
)

from .config import settings
from .exceptions import HJSolverError, ShootingError
from .logging_config import get_logger

logger = get_logger(__name__)

T = TypeVar('T')


def _log_retry(retry_state) -> None:
    error = retry_state.outcome.exception()
    logger.warning("shooting_retry",
                   attempt=retry_state.attempt_number,
                   next_damping=0.5 ** retry_state.attempt_number,
                   error=str(error))


def retry_shooting(max_attempts: int | None = None):
    """Retry a shooting solve with progressively damped Newton steps.

    The wrapped function must accept a `damping` keyword; attempt n runs with
    damping 2**-(n-1). ShootingError from the last attempt is re-raised.
    """
    attempts = max_attempts or settings.HJ_SHOOTING_RETRIES

    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @wraps(func)
        def wrapper(*args, **kwargs) -> T:
            if "damping" in kwargs:
                return func(*args, **kwargs)
            retryer = Retrying(
                stop=stop_after_attempt(attempts),
                wait=wait_none(),
                retry=retry_if_exception_type(ShootingError),
                before_sleep=_log_retry,
                reraise=True,
            )
            for attempt in retryer:
                with attempt:
                    damping = 0.5 ** (attempt.retry_state.attempt_number - 1)
                    return func(*args, damping=damping, **kwargs)
        return wrapper
    return decorator


def safe_call(
    func: Callable[..., T],
    *args,
    default: T | None = None,
    error_message: str = "diagnostic failed",
    **kwargs
) -> T | None:
    """Run a diagnostic, returning `default` when it raises a solver error."""
    try:
        return func(*args, **kwargs)
    except HJSolverError as e:
        logger.warning("safe_call_failed",
                       function=getattr(func, "__name__", repr(func)),
                       error=e.message,
                       details=e.details,
                       message=error_message)
        return default
