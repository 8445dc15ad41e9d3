import logging
import os
import threading
import time
from collections import deque
from contextlib import contextmanager
from typing import Deque, Dict, Iterator

import numpy as np

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """
    Wall-clock timings of named stages (construction, scans, quadrature grids),
    keeping the most recent window of durations per stage.
    """

    def __init__(self, window_size: int = 100):
        """
        Args:
            window_size (int): Durations kept per stage
        """
        self.window_size = window_size
        self._durations: Dict[str, Deque[float]] = {}
        self._pending: Dict[str, float] = {}
        self.lock = threading.RLock()

    def start_measurement(self, name: str):
        with self.lock:
            self._pending[name] = time.perf_counter()

    def end_measurement(self, name: str):
        with self.lock:
            started = self._pending.pop(name, None)
            if started is None:
                logger.warning(f"No start time recorded for '{name}'")
                return
            self.record_value(name, time.perf_counter() - started)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Time the enclosed block under name."""
        self.start_measurement(name)
        try:
            yield
        finally:
            self.end_measurement(name)

    def record_value(self, name: str, value: float):
        with self.lock:
            if name not in self._durations:
                self._durations[name] = deque(maxlen=self.window_size)
            self._durations[name].append(value)

    def get_metrics(self) -> Dict[str, Dict[str, float]]:
        """
        Summary statistics per stage.

        Returns:
            Dict[str, Dict[str, float]]: min/max/avg/median/p95/count/last per stage
        """
        with self.lock:
            snapshot = {name: np.fromiter(values, dtype=float) for name, values in self._durations.items() if values}
        return {
            name: {
                "min": float(arr.min()),
                "max": float(arr.max()),
                "avg": float(arr.mean()),
                "median": float(np.median(arr)),
                "p95": float(np.percentile(arr, 95)),
                "count": int(arr.size),
                "last": float(arr[-1]),
            }
            for name, arr in snapshot.items()
        }

    def format_report(self) -> str:
        lines = ["stage timings (seconds):"]
        for name, stats in sorted(self.get_metrics().items()):
            lines.append(f"  {name}: last={stats['last']:.4f} avg={stats['avg']:.4f} count={stats['count']}")
        lines.append(f"  resident memory: {memory_usage_mb():.1f} MB")
        return "\n".join(lines)

    def reset(self):
        with self.lock:
            self._durations.clear()
            self._pending.clear()


def memory_usage_mb() -> float:
    """Resident set size of this process in MB (0.0 when psutil is missing)."""
    try:
        import psutil
    except ImportError:
        logger.warning("psutil not installed, memory usage unavailable")
        return 0.0
    return psutil.Process(os.getpid()).memory_info().rss / (1024 * 1024)
