"""Process-pool scans over disjoint index ranges.

Exhaustive checks (triples, pairs) split the outer index range into chunks,
run them in worker processes and merge the chunk results in chunk order, so
the outcome does not depend on scheduling.
"""
import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor, as_completed
from logging.handlers import QueueHandler
from typing import Any, Callable, List, Optional, Tuple

from tqdm import tqdm

from .config import DEFAULT_PARALLEL_THRESHOLD

_log_queue = None


def use_log_queue(queue) -> None:
    """Route worker logging into `queue` (set by the CLI logging setup)."""
    global _log_queue
    _log_queue = queue


def _init_worker(log_queue, level: int) -> None:
    """Route worker-process logging into the main process via the queue."""
    root = logging.getLogger()
    root.handlers = [QueueHandler(log_queue)]
    root.setLevel(level)


def _auto_workers(n_tasks: int) -> int:
    """Pick a worker count that leaves room for other processes.

    Uses half the cores, capped at 61 (the Windows wait-handle limit for
    ProcessPoolExecutor) and at the number of tasks.
    """
    cores = multiprocessing.cpu_count() or 2
    return max(1, min(cores // 2, 61, n_tasks))


def _chunks(n: int, n_chunks: int) -> List[Tuple[int, int]]:
    size = max(1, -(-n // n_chunks))
    return [(start, min(n, start + size)) for start in range(0, n, size)]


def map_chunks(
    fn: Callable[[Any, int, int], Any],
    payload: Any,
    n: int,
    work: int,
    workers: int = 0,
    threshold: int = DEFAULT_PARALLEL_THRESHOLD,
    desc: str = "Scanning",
) -> List[Any]:
    """Run ``fn(payload, start, stop)`` over ``0..n`` and return results in index order.

    Args:
        fn: Module-level function (it must be picklable).
        payload: Read-only data handed to every chunk.
        n: Size of the outer index range.
        work: Estimated number of elementary evaluations, compared to `threshold`.
        workers: 0 picks automatically, 1 runs inline.
        threshold: Scans with less work than this run inline.
        desc: Progress bar label.

    Returns:
        One result per chunk, ordered by chunk start.
    """
    if n == 0:
        return []
    if workers == 1 or work < threshold or n < 2:
        return [fn(payload, 0, n)]

    workers = workers or _auto_workers(n)
    if workers == 1:
        return [fn(payload, 0, n)]
    ranges = _chunks(n, workers * 4)

    initializer, initargs = None, ()
    if _log_queue is not None:
        initializer = _init_worker
        initargs = (_log_queue, logging.getLogger().getEffectiveLevel())

    logging.debug(f"{desc}: {len(ranges)} chunks over {n} rows using {workers} workers")
    results = {}
    with ProcessPoolExecutor(max_workers=workers, initializer=initializer,
                             initargs=initargs) as executor:
        futures = {executor.submit(fn, payload, start, stop): start
                   for start, stop in ranges}
        for future in tqdm(as_completed(futures), total=len(futures),
                           desc=desc, unit="chunk", leave=False):
            results[futures[future]] = future.result()
    return [results[start] for start, _ in ranges]


def scan_workers(config: Optional[Any]) -> Tuple[int, int]:
    """(workers, threshold) from a RunConfig, or the defaults."""
    if config is None:
        return 0, DEFAULT_PARALLEL_THRESHOLD
    return config.workers, config.parallel_threshold
