from __future__ import annotations

import logging
import threading
import time
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Deque, Dict, Iterator, List, Optional

import psutil

_log = logging.getLogger(__name__)


class ResourceSampler:
    """Background thread sampling this process's RSS and CPU percent.

    Usable as a context manager around a measured stage; ``peak_rss_mb`` also
    counts the RSS at start and stop so very short stages still report a value.
    """

    def __init__(self, interval: float = 0.05, window: int = 2000) -> None:
        self.interval = interval
        self.mtx = threading.RLock()
        self.running = False
        self.thread: Optional[threading.Thread] = None
        self.samples: Deque[Dict[str, Any]] = deque(maxlen=window)
        self._proc = psutil.Process()
        self._peak_rss = 0.0

    def _rss_mb(self) -> float:
        return float(self._proc.memory_info().rss) / (1024 * 1024)

    def _record(self) -> None:
        try:
            rss = self._rss_mb()
            cpu = float(self._proc.cpu_percent(interval=None))
        except psutil.Error as e:
            _log.debug("resource sample skipped: %s", e)
            return
        with self.mtx:
            self._peak_rss = max(self._peak_rss, rss)
            self.samples.append({"ts": time.time(), "rss_mb": rss, "cpu": cpu})

    def start(self) -> "ResourceSampler":
        if self.running:
            return self
        self.running = True
        self._proc.cpu_percent(interval=None)  # prime
        self._record()
        self.thread = threading.Thread(target=self._loop, name="veridl-resources", daemon=True)
        self.thread.start()
        return self

    def stop(self) -> None:
        self.running = False
        t = self.thread
        if t:
            t.join(timeout=1.0)
        self.thread = None
        self._record()

    def _loop(self) -> None:
        while self.running:
            self._record()
            time.sleep(self.interval)

    @property
    def peak_rss_mb(self) -> float:
        with self.mtx:
            return self._peak_rss

    def snapshot(self) -> Dict[str, Any]:
        with self.mtx:
            items = list(self.samples)
        cpus = [s["cpu"] for s in items]
        return {
            "items": items,
            "peakRssMb": self.peak_rss_mb,
            "cpuMax": max(cpus) if cpus else None,
            "now": int(time.time()),
        }

    def __enter__(self) -> "ResourceSampler":
        return self.start()

    def __exit__(self, *exc: Any) -> None:
        self.stop()


@dataclass
class StageTimer:
    """Wall-clock seconds per named stage; repeated stages accumulate."""

    stages: Dict[str, float] = field(default_factory=dict)
    order: List[str] = field(default_factory=list)

    @contextmanager
    def measure(self, name: str) -> Iterator[None]:
        t0 = time.perf_counter()
        try:
            yield
        finally:
            dt = time.perf_counter() - t0
            if name not in self.stages:
                self.order.append(name)
            self.stages[name] = self.stages.get(name, 0.0) + dt

    def seconds(self, name: str) -> float:
        return self.stages.get(name, 0.0)

    def as_dict(self) -> Dict[str, float]:
        return {k: self.stages[k] for k in self.order}
