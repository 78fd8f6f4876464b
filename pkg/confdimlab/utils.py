from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from functools import wraps
from types import TracebackType
from typing import Any, Callable, Iterable, List, Optional, Sequence

from .config_params import ConfigParams
from .type_stubs import P, T

# Global variable switch controlled by the `QuietContext` context manager
_no_log: Optional[bool] = None

logger = logging.getLogger("confdimlab")


class QuietContext:
    """Context manager silencing the operation logging of confdimlab.

    Within this context manager, operations wrapped by ``operation_boilerplate``
    neither announce themselves nor report their results.

    Example
    -------
    .. code-block:: python

        with QuietContext():
            fit = fit_exponent(spec, p=2.0, levels=range(3, 7))
    """

    def __enter__(self) -> None:
        global _no_log

        # Globally disable logging
        _no_log = True

    def __exit__(
        self,
        etype: Optional[type[BaseException]],
        evalue: Optional[BaseException],
        etraceback: Optional[TracebackType],
    ) -> None:
        global _no_log

        # Disable any global modifiers
        _no_log = None


def operation_boilerplate(
    no_log: bool = False,
    format_finish: Optional[Callable[[Any], str]] = None,
) -> Callable[[Callable[P, T]], Callable[P, T]]:
    """A decorator announcing an operation and summarizing its result in the log."""

    def decorator(func: Callable[P, T]) -> Callable[P, T]:
        """The actual decorator since it takes the arguments above."""

        @wraps(func)
        def wrapped(*args: P.args, **kwargs: P.kwargs) -> T:
            # Apply the global modifier if it is set
            f_no_log = no_log if _no_log is None else _no_log

            log: Callable[..., None] = logger.info
            if f_no_log:
                # Disable logging
                def ignore(*args: Any) -> None:
                    return None

                log = ignore

            log(f"Running {func.__name__}")

            ret = func(*args, **kwargs)

            if format_finish is not None:
                log(f"Finished {func.__name__} with: {format_finish(ret)}")
            else:
                log(f"Finished {func.__name__}")

            return ret

        return wrapped

    return decorator


def parallel_map(
    func: Callable[[Any], T], items: Iterable[Any], workers: Optional[int] = None
) -> List[T]:
    """Apply ``func`` to every item, in input order, optionally in worker processes.

    The result list is ordered like ``items`` whatever the number of workers, so
    downstream reductions are independent of the parallelism.
    """
    items = list(items)
    workers = ConfigParams.workers if workers is None else workers

    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(func, items))


def stride_sample(items: Sequence[T], count: int) -> List[T]:
    """Pick ``count`` items with a fixed stride, starting from the first one."""
    if count <= 0 or not items:
        return []

    count = min(count, len(items))
    return [items[(i * len(items)) // count] for i in range(count)]
