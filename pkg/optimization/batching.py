import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import config

logger = logging.getLogger(__name__)


class BatchProcessor:
    """
    Runs independent jobs on a thread pool, returning results in submission order.

    Used as a context manager the processor keeps one pool open across run()
    calls; otherwise each multi-threaded run() opens and closes its own pool.
    """

    def __init__(self, max_workers: Optional[int] = None, batch_size: int = 16):
        """
        Initialize the batch processor.

        Args:
            max_workers (int): Maximum number of worker threads (None reads config.MAX_WORKERS)
            batch_size (int): Maximum number of jobs handed to one worker at a time
        """
        self.max_workers = max_workers if max_workers is not None else config.MAX_WORKERS
        self.batch_size = max(1, batch_size)
        self.lock = threading.RLock()
        self._executor: Optional[ThreadPoolExecutor] = None
        self._persistent = False

        self.processed_batches = 0
        self.processed_jobs = 0
        self.failed_jobs = 0
        self.pools_created = 0
        self.total_processing_time = 0.0
        self.start_time = time.time()

    def __enter__(self) -> "BatchProcessor":
        self._persistent = True
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def close(self):
        """Shut down the shared pool, if one is open."""
        with self.lock:
            executor, self._executor = self._executor, None
            self._persistent = False
        if executor is not None:
            executor.shutdown(wait=True)
            logger.debug("BatchProcessor pool closed")

    def _pool(self) -> ThreadPoolExecutor:
        with self.lock:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=self.max_workers)
                self.pools_created += 1
            return self._executor

    def run(self, func: Callable[[Any], Any], items: Iterable[Any]) -> List[Any]:
        """
        Apply func to every item.

        Args:
            func (Callable): Job body; exceptions propagate to the caller
            items (Iterable): Job inputs

        Returns:
            List[Any]: func(item) in the order of items
        """
        items = list(items)
        if not items:
            return []

        start_time = time.time()
        batches = [items[i:i + self.batch_size] for i in range(0, len(items), self.batch_size)]

        if self.max_workers == 1 or len(batches) == 1:
            nested = [self._process_batch(batch, func) for batch in batches]
        elif self._persistent:
            executor = self._pool()
            nested = self._collect(executor, batches, func)
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                with self.lock:
                    self.pools_created += 1
                nested = self._collect(executor, batches, func)

        results = [result for batch in nested for result in batch]

        with self.lock:
            self.processed_batches += len(batches)
            self.processed_jobs += len(items)
            self.total_processing_time += time.time() - start_time
        logger.debug(f"BatchProcessor ran {len(items)} jobs in {len(batches)} batches")
        return results

    def _collect(self, executor: ThreadPoolExecutor, batches: List[Sequence[Any]],
                 func: Callable[[Any], Any]) -> List[List[Any]]:
        futures = [executor.submit(self._process_batch, batch, func) for batch in batches]
        return [future.result() for future in futures]

    def _process_batch(self, batch: Sequence[Any], func: Callable[[Any], Any]) -> List[Any]:
        results = []
        for item in batch:
            try:
                results.append(func(item))
            except Exception as e:
                with self.lock:
                    self.failed_jobs += 1
                logger.error(f"Error processing job {item!r}: {e}")
                raise
        return results

    def reset_statistics(self):
        with self.lock:
            self.processed_batches = 0
            self.processed_jobs = 0
            self.failed_jobs = 0
            self.pools_created = 0
            self.total_processing_time = 0.0
            self.start_time = time.time()

    def get_statistics(self) -> Dict[str, Any]:
        """
        Get performance statistics.

        Returns:
            Dict[str, Any]: Performance statistics
        """
        with self.lock:
            return {
                "batch_size": self.batch_size,
                "max_workers": self.max_workers,
                "processed_batches": self.processed_batches,
                "processed_jobs": self.processed_jobs,
                "failed_jobs": self.failed_jobs,
                "pools_created": self.pools_created,
                "total_processing_time": self.total_processing_time,
                "elapsed_time": time.time() - self.start_time,
                "jobs_per_second": self.processed_jobs / max(0.001, self.total_processing_time),
            }
