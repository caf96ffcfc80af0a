"""
Fan-out of independent work items (ensemble batches, parameter points) across threads.

numpy releases the GIL inside its vectorized kernels and random fills, so threads give real speedups for batched path stepping. Results are yielded as they complete; callers merge them by item index so the outcome does not depend on completion order.
"""

import abc
import concurrent.futures as cf
from concurrent.futures import Executor, Future
from typing import Any, Callable, Iterable, Iterator, Tuple

from tqdm import tqdm


class WorkerException:
    """
    Wraps an exception raised within a worker. Wrapping the exception enables differentiating between exceptions raised by a function and exceptions returned by it as part of normal operation.
    """

    def __init__(self, error):
        self.error = error

    def __str__(self):
        return str(self.error)


class MockFuture(Future):
    def __init__(self, fn, args, kwargs):
        super().__init__()
        try:
            self.set_result(fn(*args, **kwargs))
        except Exception as err:
            self.set_exception(err)


class MockPoolExecutor(Executor):
    """
    Serial executor. Tasks run in the calling thread at submission time.
    """

    def __init__(self, *args, **kwargs):
        pass

    def submit(self, fn, *args, **kwargs):
        return MockFuture(fn, args, kwargs)


class _Parallelizer(abc.ABC):
    @property
    @abc.abstractmethod
    def PoolExecutor(self):
        """
        The pool executor class to use.
        """

    def __init__(self, do_raise: bool = False, verbose=False, desc=None, **pool_executor_kwargs):
        """
        :param do_raise: If :data:`True`, re-raise a worker exception as soon as it is received. Otherwise it is returned wrapped in a :class:`WorkerException`.
        :param verbose: Use :mod:`tqdm` to display progress.
        :param desc: Progress bar description.
        :param pool_executor_kwargs: Passed to the pool executor initializer.
        """
        self.do_raise = do_raise
        self.verbose = verbose
        self.desc = desc
        self.pool_executor_kwargs = pool_executor_kwargs

    def run(self, fxn: Callable, items: Iterable, **kwargs) -> Iterator[Tuple[Any, Any]]:
        """
        Calls ``fxn(item, **kwargs)`` for every item and yields ``(item, result)`` pairs in completion order.

        .. rubric:: Example

        .. code-block::

            results = {}
            for batch, out in ThreadParallelizer(max_workers=4).run(simulate_batch, range(10)):
                results[batch] = out
        """

        def result_or_exception(_future):
            try:
                return _future.result()
            except Exception as err:
                if self.do_raise:
                    raise
                return WorkerException(err)

        with self.PoolExecutor(**self.pool_executor_kwargs) as executor:
            future_to_item = {
                executor.submit(fxn, _item, **kwargs): _item for _item in items
            }
            for _future in tqdm(
                cf.as_completed(future_to_item),
                total=len(future_to_item),
                disable=not self.verbose,
                desc=self.desc,
            ):
                yield future_to_item[_future], result_or_exception(_future)


class ThreadParallelizer(_Parallelizer):
    PoolExecutor = cf.ThreadPoolExecutor

    def __init__(self, *args, thread_name_prefix="dyadmhd", **kwargs):
        super().__init__(*args, thread_name_prefix=thread_name_prefix, **kwargs)


class MockParallelizer(_Parallelizer):
    PoolExecutor = MockPoolExecutor


def parallelizer(threads: int, **kwargs) -> _Parallelizer:
    """
    Returns a :class:`MockParallelizer` for ``threads`` of 0 or 1 and a :class:`ThreadParallelizer` with ``threads`` workers otherwise.
    """
    if threads < 0:
        raise ValueError(f"Invalid number of threads {threads}.")
    if threads <= 1:
        return MockParallelizer(**kwargs)
    return ThreadParallelizer(max_workers=threads, **kwargs)
