"""Console logging and stage timing for simulation runs."""
import asyncio
import functools
import time
from typing import Any, Callable, Dict, Optional

from rich.console import Console

# Progress goes to stderr so stdout stays clean for piped output.
console = Console(stderr=True)

_quiet = False


def set_quiet(quiet: bool) -> None:
    """Silence or re-enable progress messages."""
    global _quiet
    _quiet = quiet


def log_event(tag: str, message: str) -> None:
    """Print a ``[TAG] message`` progress line."""
    if _quiet:
        return
    console.print(f"[{tag}] {message}", markup=False, highlight=False)


class MetricsCollector:
    """Collect stage timings and errors of one run."""

    def __init__(self):
        self.metrics: Dict[str, Any] = {
            "stages": {},
            "errors": [],
            "latencies": []
        }

    def record_stage(self, stage_name: str, latency: float):
        """Record the duration of one stage call."""
        if stage_name not in self.metrics["stages"]:
            self.metrics["stages"][stage_name] = {
                "count": 0,
                "total_seconds": 0.0,
                "avg_latency": 0.0
            }

        stage_metrics = self.metrics["stages"][stage_name]
        stage_metrics["count"] += 1
        stage_metrics["total_seconds"] += latency
        stage_metrics["avg_latency"] = stage_metrics["total_seconds"] / stage_metrics["count"]

        self.metrics["latencies"].append(latency)

    def record_error(self, stage_name: str, error: str):
        """Record an error occurrence."""
        self.metrics["errors"].append({
            "stage": stage_name,
            "error": error,
            "timestamp": time.time()
        })

    @property
    def total_seconds(self) -> float:
        return sum(self.metrics["latencies"])

    def get_summary(self) -> Dict[str, Any]:
        """Get metrics summary for the run manifest."""
        calls = sum(stage["count"] for stage in self.metrics["stages"].values())
        return {
            **self.metrics,
            "total_seconds": self.total_seconds,
            "error_rate": len(self.metrics["errors"]) / calls if calls else 0
        }


def trace_stage(stage_name: str, collector: Optional[MetricsCollector] = None):
    """Decorator that times a stage, logs it and feeds an optional collector.

    Works for plain functions and coroutines. A collector can also be attached
    per call through a ``metrics`` attribute on the bound instance.
    """
    def _collector_for(args) -> Optional[MetricsCollector]:
        if collector is not None:
            return collector
        if args and isinstance(getattr(args[0], "metrics", None), MetricsCollector):
            return args[0].metrics
        return None

    def _finish(args, start_time: float, error: Optional[BaseException]):
        execution_time = time.perf_counter() - start_time
        target = _collector_for(args)
        if target is not None:
            target.record_stage(stage_name, execution_time)
            if error is not None:
                target.record_error(stage_name, str(error))
        if error is None:
            log_event("STAGE", f"{stage_name} finished in {execution_time:.2f}s")
        else:
            log_event("STAGE", f"{stage_name} failed after {execution_time:.2f}s: {error}")

    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        async def async_wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = await func(*args, **kwargs)
            except BaseException as e:
                _finish(args, start_time, e)
                raise
            _finish(args, start_time, None)
            return result

        @functools.wraps(func)
        def sync_wrapper(*args, **kwargs):
            start_time = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except BaseException as e:
                _finish(args, start_time, e)
                raise
            _finish(args, start_time, None)
            return result

        if asyncio.iscoroutinefunction(func):
            return async_wrapper
        return sync_wrapper

    return decorator
