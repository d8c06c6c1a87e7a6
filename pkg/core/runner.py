"""
Async orchestration of one simulation run: simulate, then write artifacts.
"""
import asyncio
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from pathlib import Path
from typing import Optional

from core import __version__
from core.config import RuntimeConfig, SimConfig
from core.models import RunManifest
from core.population import simulate_population
from core.state import RunOutcome, RunState
from tools.config_loader import config_echo
from tools.writers import OutputError, write_curves, write_individuals, write_summary
from tools.writers import dump_paths as dump_all_paths
from utils.tracing import MetricsCollector, log_event, trace_stage

SUMMARY_FILE = "summary.json"
CURVES_FILE = "curves.csv"
INDIVIDUALS_FILE = "individuals.csv"
PATHS_FILE = "paths.npz"
SIMULATE_THREAD = "hrqol-simulate"


class SimulationRunner:
    """Runs the population simulation off the event loop and writes its results."""

    def __init__(
        self,
        config: SimConfig,
        runtime: Optional[RuntimeConfig] = None,
        out_dir: Optional[Path] = None,
        dump_paths: bool = False,
    ):
        self.config = config
        self.runtime = runtime or RuntimeConfig()
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.dump_paths = dump_paths
        self.metrics = MetricsCollector()
        # set when the run is abandoned; the population loop stops at the next batch
        self.cancel_event = threading.Event()

    def _initial_state(self) -> RunState:
        return {
            "config": self.config,
            "runtime": self.runtime,
            "out_dir": self.out_dir,
            "dump_paths": self.dump_paths,
            "result": None,
            "manifest": None,
            "written": {},
            "error_messages": [],
        }

    @trace_stage("simulate")
    async def simulate(self, state: RunState) -> RunState:
        """Simulation stage; the CPU work runs in a worker thread.

        Cancelling the stage (for example by the run's timeout) sets
        ``cancel_event``, so the worker thread returns after its current batch.
        """
        loop = asyncio.get_running_loop()
        # not the default executor, which asyncio.run joins on exit
        executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix=SIMULATE_THREAD)
        work = partial(simulate_population, state["config"], state["runtime"], cancel=self.cancel_event)
        try:
            result = await loop.run_in_executor(executor, work)
        except asyncio.CancelledError:
            self.cancel_event.set()
            raise
        finally:
            executor.shutdown(wait=False, cancel_futures=True)

        state["result"] = result
        state["manifest"] = RunManifest(
            config=config_echo(state["config"]),
            version=__version__,
            runtime_seconds=0.0,
        )
        return state

    @trace_stage("write")
    async def write_outputs(self, state: RunState) -> RunState:
        """Write summary, curves, individuals and optionally all paths."""
        out_dir = state["out_dir"]
        if out_dir is None:
            return state

        result, manifest = state["result"], state["manifest"]
        written = state["written"]
        written["summary"] = write_summary(result, manifest, out_dir / SUMMARY_FILE)
        written["curves"] = write_curves(result, out_dir / CURVES_FILE)
        written["individuals"] = write_individuals(result, out_dir / INDIVIDUALS_FILE)
        if state["dump_paths"]:
            written["paths"] = dump_all_paths(result, out_dir / PATHS_FILE)
        return state

    def _stamp_runtime(self, state: RunState) -> None:
        """Record the simulate stage's time; the manifest is written before the write stage ends."""
        simulate = self.metrics.get_summary()["stages"].get("simulate")
        if state["manifest"] is not None and simulate is not None:
            state["manifest"] = state["manifest"].model_copy(
                update={"runtime_seconds": round(simulate["total_seconds"], 3)}
            )

    async def _run_stages(self, state: RunState) -> RunState:
        state = await self.simulate(state)
        self._stamp_runtime(state)
        return await self.write_outputs(state)

    async def run(self) -> RunOutcome:
        """Run every stage, enforcing the optional wall-clock limit."""
        start_time = time.time()
        state = self._initial_state()
        self.cancel_event.clear()
        timeout = self.runtime.timeout_seconds
        log_event("RUNNER", f"Starting run: n={self.config.n}, seed={self.config.seed}, workers={self.runtime.resolved_workers}")

        try:
            state = await asyncio.wait_for(self._run_stages(state), timeout=timeout)
        except asyncio.TimeoutError:
            self.cancel_event.set()
            log_event("RUNNER", f"Run exceeded {timeout} seconds")
            return RunOutcome(
                success=False,
                execution_time=time.time() - start_time,
                error=f"Run exceeded the time limit of {timeout} seconds",
                error_kind="timeout",
                errors=state["error_messages"],
            )
        except OutputError as e:
            log_event("RUNNER", f"Write failed: {e}")
            state["error_messages"].append(str(e))
            return RunOutcome(
                success=False,
                result=state["result"],
                manifest=state["manifest"],
                written=state["written"],
                execution_time=time.time() - start_time,
                error=str(e),
                error_kind="output",
                errors=state["error_messages"],
            )
        except Exception as e:
            log_event("RUNNER", f"Run failed: {str(e)[:200]}")
            state["error_messages"].append(str(e))
            return RunOutcome(
                success=False,
                execution_time=time.time() - start_time,
                error=str(e),
                error_kind="simulation",
                errors=state["error_messages"],
            )

        execution_time = time.time() - start_time
        log_event("RUNNER", f"Run finished in {execution_time:.2f}s")
        return RunOutcome(
            success=True,
            result=state["result"],
            manifest=state["manifest"],
            written=state["written"],
            execution_time=execution_time,
            errors=state["error_messages"],
        )


def create_runner(
    config: SimConfig,
    runtime: Optional[RuntimeConfig] = None,
    out_dir: Optional[Path] = None,
    dump_paths: bool = False,
) -> SimulationRunner:
    """Factory function to create a simulation runner."""
    return SimulationRunner(config, runtime=runtime, out_dir=out_dir, dump_paths=dump_paths)
