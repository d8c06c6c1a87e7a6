"""Coupled SDE / hazard simulation of a population and its summaries."""
import math
import threading
from concurrent.futures import Future, ProcessPoolExecutor, wait
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from core.config import RuntimeConfig, SimConfig
from core.models import PopulationResult, PopulationSummary, QuantileCurves, QuantileTriple, Trajectory
from core.mortality import (
    HazardAccumulator,
    advance_hazard,
    crossing_times,
    draw_threshold,
    step_hazard,
)
from core.sde import exponential_em_step
from core.streams import RandomStream, make_stream
from utils.tracing import log_event

DEFAULT_PROBS = (0.25, 0.5, 0.75)
# stored columns sorted at once when building quantile curves
CURVE_BLOCK = 256
# seconds between cancellation checks while waiting on worker processes
CANCEL_POLL_SECONDS = 0.05


class SimulationCancelled(RuntimeError):
    """Raised when a population run is cancelled between batches."""


@dataclass
class BatchResult:
    """Raw output of one batch of consecutive individuals."""
    start_index: int
    ages: np.ndarray
    paths: np.ndarray
    tau: np.ndarray
    x_at_death: np.ndarray
    haly: np.ndarray
    censored: np.ndarray

    def trajectories(self) -> list[Trajectory]:
        return [
            Trajectory(
                index=self.start_index + i,
                times=self.ages,
                values=self.paths[i],
                tau=float(self.tau[i]),
                x_at_death=float(self.x_at_death[i]),
                haly=float(self.haly[i]),
                censored=bool(self.censored[i]),
            )
            for i in range(len(self.tau))
        ]


def stored_columns(n_steps: int, record_every: int) -> np.ndarray:
    """Grid indices kept in stored paths; the final age is always kept."""
    columns = np.arange(0, n_steps + 1, record_every)
    if columns[-1] != n_steps:
        columns = np.append(columns, n_steps)
    return columns


def haly_integral(values: Sequence[float], tau: float, dt: float) -> float:
    """Health adjusted life years of one path.

    Trapezoidal rule over the full steps inside [0, tau], plus the remaining
    piece [last grid point, tau] as a rectangle of the last living value.

    ``values`` must be the living path on the full grid: X at every grid
    point up to tau, with a grid value at tau read as the left limit X(tau-).
    The stored, stopped path is already 0 at a grid point equal to tau, so
    passing it trapezoids the last step down to 0 and undercounts by half a
    step of X(tau-).
    """
    values = np.asarray(values, dtype=float)
    # tolerance keeps a tau sitting on a grid point from losing its last step
    full_steps = min(int(math.floor(tau / dt + 1e-9)), len(values) - 1)
    area = trapezoid(values[: full_steps + 1], dx=dt) if full_steps > 0 else 0.0
    remainder = tau - full_steps * dt
    if remainder > 0.0:
        area += values[full_steps] * remainder
    return float(min(max(area, 0.0), tau))


def simulate_batch(
    config: SimConfig,
    streams: Sequence[RandomStream],
    start_index: int = 0,
    record_every: int = 1,
) -> BatchResult:
    """Advance a block of individuals together until death or omega.

    Each step evaluates the hazard at (t, X_t), advances the cumulative hazard,
    records deaths whose threshold was crossed, and moves survivors with one
    Euler-Maruyama step whose linear drift is integrated exactly. The drift's
    age factor is read at the step midpoint.
    """
    dt = config.dt
    n_steps = config.n_steps
    size = len(streams)

    # threshold first, then one full vector of increments per individual
    thresholds = np.array([draw_threshold(stream.uniform()) for stream in streams])
    normals = np.stack([stream.standard_normals(n_steps) for stream in streams], axis=1)

    path = np.empty((size, n_steps + 1))
    path[:, 0] = config.x0
    x = path[:, 0].copy()
    acc = HazardAccumulator(cumulative_hazard=np.zeros(size), threshold=thresholds)
    alive = np.ones(size, dtype=bool)
    tau = np.full(size, config.omega)
    x_at_death = np.zeros(size)
    # first grid index of the stopped (zero) part
    first_zero = np.full(size, n_steps + 1)

    for k in range(n_steps):
        t = k * dt
        before = acc.cumulative_hazard
        hazard = np.where(alive, step_hazard(t, x, dt, config.hazard), 0.0)
        acc = advance_hazard(acc, hazard, dt)
        crossing = crossing_times(t, dt, before, acc.cumulative_hazard, acc.threshold)
        died = alive & ~np.isnan(crossing)
        if died.any():
            tau[died] = crossing[died]
            x_at_death[died] = x[died]
            first_zero[died] = k + 1
            alive &= ~died

        # the dead keep their last living value until the path is stopped below
        stepped = exponential_em_step(t + 0.5 * dt, x, dt, normals[k], config.drift, config.diffusion)
        x = np.where(alive, stepped, x)
        path[:, k + 1] = x

        if not alive.any():
            path[:, k + 2:] = x[:, None]
            break

    censored = alive
    if censored.any():
        x_at_death[censored] = path[censored, n_steps - 1]

    haly = np.array([haly_integral(path[i], tau[i], dt) for i in range(size)])

    # censoring is death at omega; HALY above already used the living path
    first_zero[censored] = n_steps
    # stop the process: zero at every grid age >= tau
    path[np.arange(n_steps + 1)[None, :] >= first_zero[:, None]] = 0.0

    columns = stored_columns(n_steps, record_every)
    ages = np.round(columns * dt, 10)
    return BatchResult(
        start_index=start_index,
        ages=ages,
        paths=path[:, columns],
        tau=tau,
        x_at_death=x_at_death,
        haly=haly,
        censored=censored,
    )


def simulate_individual(
    config: SimConfig,
    stream: RandomStream,
    index: int = 0,
    record_every: int = 1,
) -> Trajectory:
    """Simulate one individual from its own random stream."""
    return simulate_batch(config, [stream], start_index=index, record_every=record_every).trajectories()[0]


def quantile(sorted_values: Sequence[float], p: float) -> float:
    """Type-7 quantile: linear interpolation between order statistics at rank (n-1)p."""
    values = np.asarray(sorted_values, dtype=float)
    if values.size == 0:
        raise ValueError("quantile of an empty sample")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    return float(_type7(values, p))


def _type7(sorted_values: np.ndarray, p: float) -> Union[float, np.ndarray]:
    """Type-7 quantile along axis 0 of already sorted data."""
    n = sorted_values.shape[0]
    h = (n - 1) * p
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    low, high = sorted_values[lo], sorted_values[hi]
    # clip keeps round-off from breaking monotonicity across probabilities
    return np.clip(low + (h - lo) * (high - low), low, high)


def pointwise_quantiles(
    trajectories: Sequence[Trajectory],
    probs: Sequence[float] = DEFAULT_PROBS,
) -> QuantileCurves:
    """Quantiles of the stopped process at every stored age; the dead count as 0.

    Columns are sorted CURVE_BLOCK at a time, so the extra memory is one block
    rather than a second copy of every stored path.
    """
    if not trajectories:
        raise ValueError("no trajectories to summarise")
    ages = trajectories[0].times
    for trajectory in trajectories[1:]:
        if trajectory.times.shape != ages.shape or not np.array_equal(trajectory.times, ages):
            raise ValueError(f"trajectory {trajectory.index} is on a different grid")

    curves = np.empty((len(probs), ages.shape[0]))
    for lo in range(0, ages.shape[0], CURVE_BLOCK):
        hi = min(lo + CURVE_BLOCK, ages.shape[0])
        block = np.stack([trajectory.values[lo:hi] for trajectory in trajectories])
        block.sort(axis=0)
        for row, p in enumerate(probs):
            curves[row, lo:hi] = _type7(block, p)
    return QuantileCurves(ages=ages, probs=tuple(float(p) for p in probs), curves=curves)


def _triple(values: np.ndarray) -> QuantileTriple:
    ordered = np.sort(values)
    return QuantileTriple(
        median=quantile(ordered, 0.5),
        q25=quantile(ordered, 0.25),
        q75=quantile(ordered, 0.75),
    )


def summarize(trajectories: Sequence[Trajectory]) -> PopulationSummary:
    """Median/IQR triples of tau, HRQoL at death and HALY."""
    return PopulationSummary(
        life_expectancy=_triple(np.array([trajectory.tau for trajectory in trajectories])),
        hrqol_at_death=_triple(np.array([trajectory.x_at_death for trajectory in trajectories])),
        haly=_triple(np.array([trajectory.haly for trajectory in trajectories])),
        n=len(trajectories),
        censored=sum(trajectory.censored for trajectory in trajectories),
    )


def _simulate_chunk(task: tuple[SimConfig, int, int, int]) -> BatchResult:
    """Worker entry point: individuals [start, stop) on their own substreams."""
    config, start, stop, record_every = task
    streams = [make_stream(config.seed, index) for index in range(start, stop)]
    return simulate_batch(config, streams, start_index=start, record_every=record_every)


def _check_cancel(cancel: Optional[threading.Event], done: int, total: int) -> None:
    if cancel is not None and cancel.is_set():
        log_event("POPULATION", f"Cancelled after {done} of {total} batches")
        raise SimulationCancelled(f"population run cancelled after {done} of {total} batches")


def _await_batch(future: Future, cancel: Optional[threading.Event], done: int, total: int) -> BatchResult:
    if cancel is None:
        return future.result()
    while True:
        _check_cancel(cancel, done, total)
        if wait([future], timeout=CANCEL_POLL_SECONDS).done:
            return future.result()


def _run_serial(tasks: list, cancel: Optional[threading.Event]) -> list[BatchResult]:
    batches = []
    for task in tasks:
        _check_cancel(cancel, len(batches), len(tasks))
        batches.append(_simulate_chunk(task))
    return batches


def _run_parallel(tasks: list, workers: int, cancel: Optional[threading.Event]) -> list[BatchResult]:
    executor = ProcessPoolExecutor(max_workers=workers)
    cancelled = False
    try:
        futures = [executor.submit(_simulate_chunk, task) for task in tasks]
        batches = []
        for future in futures:
            batches.append(_await_batch(future, cancel, len(batches), len(tasks)))
        return batches
    except SimulationCancelled:
        cancelled = True
        raise
    finally:
        # after a cancel only the batches already running are finished
        executor.shutdown(wait=not cancelled, cancel_futures=True)


def simulate_population(
    config: SimConfig,
    runtime: Optional[RuntimeConfig] = None,
    cancel: Optional[threading.Event] = None,
) -> PopulationResult:
    """Simulate config.n individuals and reduce them to summaries and curves.

    Batch boundaries depend only on ``runtime.batch_size``, and each individual
    draws from the substream of (seed, index), so the result is bit-identical
    for any number of workers.

    Raises:
        SimulationCancelled: ``cancel`` was set; checked between batches
    """
    runtime = runtime or RuntimeConfig()
    tasks = [
        (config, start, min(start + runtime.batch_size, config.n), runtime.record_every)
        for start in range(0, config.n, runtime.batch_size)
    ]
    workers = min(runtime.resolved_workers, len(tasks))
    log_event(
        "POPULATION",
        f"Simulating {config.n} individuals in {len(tasks)} batches on {workers} worker(s)"
    )

    if workers > 1:
        batches = _run_parallel(tasks, workers, cancel)
    else:
        batches = _run_serial(tasks, cancel)

    trajectories = [trajectory for batch in batches for trajectory in batch.trajectories()]
    summary = summarize(trajectories)
    log_event(
        "POPULATION",
        f"Median life expectancy {summary.life_expectancy.median:.2f}, "
        f"median HALY {summary.haly.median:.2f}, censored {summary.censored}"
    )
    return PopulationResult(
        config=config,
        trajectories=trajectories,
        summary=summary,
        curves=pointwise_quantiles(trajectories),
    )
