"""Tests for the async simulation runner and the stage tracing it relies on."""
import asyncio
import json
import threading
import time

import pytest

from core import __version__
from core.config import RuntimeConfig, SimConfig
from core.runner import (
    CURVES_FILE,
    INDIVIDUALS_FILE,
    PATHS_FILE,
    SIMULATE_THREAD,
    SUMMARY_FILE,
    create_runner,
)
from tools.config_loader import parse_config
from utils.tracing import MetricsCollector, trace_stage


@pytest.fixture
def config():
    return SimConfig(n=25, dt=0.1, seed=5)


async def test_run_writes_artifacts(config, tmp_path):
    outcome = await create_runner(config, out_dir=tmp_path).run()

    assert outcome.success
    assert outcome.error is None
    assert set(outcome.written) == {"summary", "curves", "individuals"}
    for name in (SUMMARY_FILE, CURVES_FILE, INDIVIDUALS_FILE):
        assert (tmp_path / name).exists()
    assert not (tmp_path / PATHS_FILE).exists()

    document = json.loads((tmp_path / SUMMARY_FILE).read_text())
    assert document["manifest"]["version"] == __version__
    assert document["manifest"]["runtime_seconds"] >= 0.0
    assert parse_config(json.dumps(document["manifest"]["config"])) == config
    assert document["median_le"] == outcome.result.summary.life_expectancy.median


async def test_manifest_runtime_is_the_simulate_stage(config, tmp_path):
    runner = create_runner(config, out_dir=tmp_path)
    outcome = await runner.run()
    simulate_seconds = runner.metrics.get_summary()["stages"]["simulate"]["total_seconds"]
    document = json.loads((tmp_path / SUMMARY_FILE).read_text())
    assert document["manifest"]["runtime_seconds"] == round(simulate_seconds, 3)
    assert outcome.manifest.runtime_seconds == round(simulate_seconds, 3)


async def test_run_dumps_paths_on_request(config, tmp_path):
    outcome = await create_runner(config, out_dir=tmp_path, dump_paths=True).run()
    assert outcome.success
    assert outcome.written["paths"] == tmp_path / PATHS_FILE
    assert (tmp_path / PATHS_FILE).exists()


async def test_run_without_output_directory(config):
    outcome = await create_runner(config).run()
    assert outcome.success
    assert outcome.written == {}
    assert outcome.result.summary.n == 25
    assert outcome.manifest.config["seed"] == 5


async def test_stage_metrics(config):
    runner = create_runner(config)
    await runner.run()
    stages = runner.metrics.get_summary()["stages"]
    assert stages["simulate"]["count"] == 1
    assert stages["write"]["count"] == 1
    assert runner.metrics.get_summary()["error_rate"] == 0


async def test_output_failure_reported(config, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    outcome = await create_runner(config, out_dir=blocker).run()
    assert not outcome.success
    assert outcome.error_kind == "output"
    assert outcome.result is not None
    assert "blocker" in outcome.error


async def test_timeout_reported():
    runtime = RuntimeConfig(timeout_seconds=1e-6)
    runner = create_runner(SimConfig(n=200, dt=0.1), runtime=runtime)
    outcome = await runner.run()
    assert not outcome.success
    assert outcome.error_kind == "timeout"
    assert outcome.result is None
    assert runner.cancel_event.is_set()


def simulate_threads():
    return [thread for thread in threading.enumerate() if thread.name.startswith(SIMULATE_THREAD)]


async def test_timeout_stops_the_simulation_thread():
    # a full run of this size takes far longer than the wait below
    runtime = RuntimeConfig(timeout_seconds=0.3, batch_size=8)
    outcome = await create_runner(SimConfig(n=4000), runtime=runtime).run()
    assert outcome.error_kind == "timeout"

    deadline = time.monotonic() + 15.0
    while simulate_threads() and time.monotonic() < deadline:
        await asyncio.sleep(0.05)
    assert simulate_threads() == []


async def test_run_clears_a_stale_cancellation(config):
    runner = create_runner(config)
    runner.cancel_event.set()
    outcome = await runner.run()
    assert outcome.success
    assert not runner.cancel_event.is_set()


async def test_parallel_workers_match_serial(config):
    serial = await create_runner(config, runtime=RuntimeConfig(batch_size=8)).run()
    parallel = await create_runner(config, runtime=RuntimeConfig(batch_size=8, workers=2)).run()
    assert serial.result.summary == parallel.result.summary
    assert [t.tau for t in serial.result.trajectories] == [t.tau for t in parallel.result.trajectories]


class TestTraceStage:
    def test_sync_stage_recorded(self):
        collector = MetricsCollector()

        @trace_stage("double", collector)
        def double(x):
            return 2 * x

        assert double(4) == 8
        assert collector.get_summary()["stages"]["double"]["count"] == 1

    def test_failure_recorded_and_raised(self):
        collector = MetricsCollector()

        @trace_stage("broken", collector)
        def broken():
            raise RuntimeError("boom")

        with pytest.raises(RuntimeError):
            broken()
        summary = collector.get_summary()
        assert summary["errors"][0]["stage"] == "broken"
        assert summary["error_rate"] == 1.0

    async def test_async_stage_recorded(self):
        collector = MetricsCollector()

        @trace_stage("wait", collector)
        async def wait():
            return "done"

        assert await wait() == "done"
        assert collector.total_seconds >= 0.0
        assert collector.get_summary()["stages"]["wait"]["count"] == 1
