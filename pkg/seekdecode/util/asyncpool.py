import asyncio
import logging
import typing as t
from concurrent.futures import ProcessPoolExecutor
from contextlib import asynccontextmanager

logger = logging.getLogger("asyncpool")

T = t.TypeVar("T")
R = t.TypeVar("R")


class WorkerPoolError(RuntimeError):
    """
    Raised on pool exit when at least one item failed; the original exception is chained.
    """


async def _run_worker(queue: asyncio.Queue[T], fn: t.Callable[[T], t.Awaitable[None]], errors: list[BaseException]) -> None:
    while True:
        item = await queue.get()

        # Wrap in exception handler so a single failure doesn't kill the worker
        try:
            await fn(item)
        except Exception as e:
            logger.exception(f"Error processing item {item}", exc_info=e)
            errors.append(e)
        finally:
            queue.task_done()


@asynccontextmanager
async def asyncpool_queue(fn: t.Callable[[T], t.Awaitable[None]], worker_count: int = 5, maxsize: int = 0) -> t.AsyncIterator[asyncio.Queue[T]]:
    """
    Run a pool of workers to process items from a queue. The queue is returned
    from the context manager and can be used to enqueue items for processing.

    The queue is drained when the context manager exits. Exceptions in the worker function are logged, and once the
    queue has drained the first of them is re-raised as WorkerPoolError: a sweep must never silently lose items.

    :param fn: The function to run for each item in the queue.
    :param worker_count: The number of workers to run
    :param maxsize: The maximum size of the queue. If 0, the queue is unbounded.
    """

    queue: asyncio.Queue[T] = asyncio.Queue(maxsize=maxsize)
    errors: list[BaseException] = []
    workers = [asyncio.create_task(_run_worker(queue, fn, errors), name="asyncpool worker") for _ in range(worker_count)]

    try:
        yield queue
        await queue.join()
    finally:
        for worker in workers:
            worker.cancel()
        await asyncio.gather(*workers, return_exceptions=True)

    if errors:
        raise WorkerPoolError(f"{len(errors)} item(s) failed") from errors[0]


@asynccontextmanager
async def asyncpool(fn: t.Callable[[T], t.Awaitable[None]], worker_count: int = 5, maxsize: int = 0) -> t.AsyncIterator[t.Callable[[T], t.Awaitable[None]]]:
    """
    As asyncpool_queue above but a function is returned that can be used to enqueue items for processing.

    Usage:

    async def worker(item):
        ... do stuff ...

    async with asyncpool(worker, worker_count=10) as enqueue:
        for i in range(100):
            await enqueue(i)
    """

    async with asyncpool_queue(fn, worker_count=worker_count, maxsize=maxsize) as queue:
        yield queue.put


async def map_in_processes(fn: t.Callable[[T], R], items: t.Sequence[T], workers: int = 1) -> list[R]:
    """
    Apply a picklable function to every item and return the results in input order.

    With workers <= 1 everything runs in-process, which keeps tests and small runs free of process start-up cost.
    Otherwise items are fanned out to a process pool through asyncpool; completion order never affects the result.
    """
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    loop = asyncio.get_running_loop()
    results: dict[int, R] = {}

    with ProcessPoolExecutor(max_workers=workers) as executor:

        async def run_one(job: tuple[int, T]) -> None:
            idx, item = job
            results[idx] = await loop.run_in_executor(executor, fn, item)

        async with asyncpool(run_one, worker_count=workers) as enqueue:
            for job in enumerate(items):
                await enqueue(job)

    return [results[i] for i in range(len(items))]
