"""Population-scale checks of the calibrated model and its numerical properties."""
import math

import numpy as np
import pytest
from scipy import stats

from core.config import DiffusionParams, DriftTable, HazardParams, RuntimeConfig, SimConfig
from core.mortality import gompertz_quantile, gompertz_survival_oracle
from core.population import quantile, simulate_batch, simulate_individual, simulate_population
from core.streams import make_stream

pytestmark = pytest.mark.slow

N_LARGE = 10_000
CHUNK = 1000


def triple(values):
    ordered = np.sort(values)
    return quantile(ordered, 0.5), quantile(ordered, 0.25), quantile(ordered, 0.75)


@pytest.fixture(scope="module")
def default_run():
    """10,000 individuals of the calibrated model, checked chunk by chunk at full resolution."""
    config = SimConfig(n=N_LARGE)
    taus, xs, halys = [], [], []
    lowest, highest, any_nan, stopped_ok = 1.0, 0.0, False, True
    for start in range(0, N_LARGE, CHUNK):
        streams = [make_stream(config.seed, index) for index in range(start, start + CHUNK)]
        batch = simulate_batch(config, streams, start_index=start)
        any_nan |= bool(np.isnan(batch.paths).any())
        lowest = min(lowest, float(np.nanmin(batch.paths)))
        highest = max(highest, float(np.nanmax(batch.paths)))
        dead = batch.ages[None, :] >= batch.tau[:, None]
        stopped_ok &= bool(np.all(batch.paths[dead] == 0.0))
        taus.append(batch.tau)
        xs.append(batch.x_at_death)
        halys.append(batch.haly)
    return {
        "tau": np.concatenate(taus),
        "x_at_death": np.concatenate(xs),
        "haly": np.concatenate(halys),
        "lowest": lowest,
        "highest": highest,
        "any_nan": any_nan,
        "stopped_ok": stopped_ok,
    }


class TestCalibratedModel:
    def test_median_life_expectancy(self, default_run):
        median, _, _ = triple(default_run["tau"])
        assert median == pytest.approx(83.19, abs=1.0)

    def test_median_haly(self, default_run):
        median, _, _ = triple(default_run["haly"])
        assert median == pytest.approx(72.23, abs=1.5)

    def test_median_hrqol_at_death(self, default_run):
        median, _, _ = triple(default_run["x_at_death"])
        assert median == pytest.approx(0.5797, abs=0.06)

    def test_life_expectancy_iqr(self, default_run):
        _, q25, q75 = triple(default_run["tau"])
        assert q25 == pytest.approx(74.62, abs=2.0)
        assert q75 == pytest.approx(88.63, abs=2.0)

    def test_haly_iqr(self, default_run):
        _, q25, q75 = triple(default_run["haly"])
        assert q25 == pytest.approx(66.43, abs=2.5)
        assert q75 == pytest.approx(76.80, abs=2.5)

    def test_paths_bounded(self, default_run):
        assert not default_run["any_nan"]
        assert default_run["lowest"] >= 0.0
        assert default_run["highest"] <= 1.0

    def test_paths_stopped(self, default_run):
        assert default_run["stopped_ok"]

    def test_haly_never_exceeds_lifetime(self, default_run):
        assert np.all(default_run["haly"] >= 0.0)
        assert np.all(default_run["haly"] <= default_run["tau"])
        assert np.all(default_run["tau"] <= 110.0)


def test_frozen_covariate_stopping_times_follow_gompertz():
    hazard = HazardParams()
    config = SimConfig(
        n=N_LARGE,
        x0=1.0,
        diffusion=DiffusionParams(scale=0.0),
        drift=DriftTable.constant(0.0),
    )
    result = simulate_population(config, RuntimeConfig(batch_size=2500, record_every=1000))
    taus = np.array([trajectory.tau for trajectory in result.trajectories])

    statistic, p_value = stats.kstest(taus, lambda t: 1.0 - gompertz_survival_oracle(t, 1.0, hazard))
    assert p_value > 0.01
    assert statistic < 1.628 / math.sqrt(N_LARGE)
    assert result.summary.life_expectancy.median == pytest.approx(gompertz_quantile(0.5, 1.0, hazard), abs=0.3)
    assert result.summary.life_expectancy.median == pytest.approx(85.06, abs=0.3)


def test_mean_path_follows_linear_drift():
    config = SimConfig(
        n=N_LARGE,
        omega=11.0,
        x0=1.0,
        hazard=HazardParams(alpha=-1e9),
        drift=DriftTable.constant(-0.005),
    )
    result = simulate_population(config, RuntimeConfig(batch_size=2500, record_every=100))
    assert result.summary.censored == N_LARGE
    # omega itself is the censoring age, where every path is 0
    column = int(np.flatnonzero(result.ages == 10.0)[0])
    final = np.array([trajectory.values[column] for trajectory in result.trajectories])
    standard_error = final.std(ddof=1) / math.sqrt(N_LARGE)
    assert abs(final.mean() - math.exp(-0.05)) < 3.0 * standard_error


def test_haly_converges_in_step_size(fixed_stream):
    coarse = SimConfig(n=1, dt=0.01, diffusion=DiffusionParams(scale=0.0))
    fine = SimConfig(n=1, dt=0.001, diffusion=DiffusionParams(scale=0.0))
    # the last two thresholds outlive omega
    for u in (0.9, 0.5, 0.25, 0.1, 0.01, 1e-3, 1e-4, 1e-6, 1e-10, 1e-300):
        haly_coarse = simulate_individual(coarse, fixed_stream(u)).haly
        haly_fine = simulate_individual(fine, fixed_stream(u)).haly
        assert abs(haly_coarse - haly_fine) < 1e-3, f"u={u}"


def test_serial_and_parallel_runs_identical():
    config = SimConfig(n=300, seed=123)
    runtime = dict(batch_size=64, record_every=10)
    serial = simulate_population(config, RuntimeConfig(**runtime))
    parallel = simulate_population(config, RuntimeConfig(workers=3, **runtime))
    assert [t.tau for t in serial.trajectories] == [t.tau for t in parallel.trajectories]
    assert [t.haly for t in serial.trajectories] == [t.haly for t in parallel.trajectories]
    assert np.array_equal(serial.curves.curves, parallel.curves.curves)
