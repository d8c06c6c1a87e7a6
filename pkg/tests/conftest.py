"""Shared fixtures for the simulator tests."""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from core.config import DiffusionParams, DriftTable, SimConfig  # noqa: E402
from utils.tracing import set_quiet  # noqa: E402


class FixedStream:
    """Stream with a preset uniform and a preset (default all-zero) normal sequence."""

    def __init__(self, u: float, normals=None):
        self.u = u
        self.normals = normals

    def uniform(self) -> float:
        return self.u

    def standard_normals(self, size: int) -> np.ndarray:
        if self.normals is None:
            return np.zeros(size)
        return np.resize(np.asarray(self.normals, dtype=float), size)


@pytest.fixture(autouse=True)
def quiet_logs():
    set_quiet(True)
    yield
    set_quiet(False)


@pytest.fixture
def fixed_stream():
    """Factory for FixedStream instances."""
    return FixedStream


@pytest.fixture
def deterministic_config():
    """No noise, no drift, perfect health at birth."""
    return SimConfig(
        n=1,
        x0=1.0,
        diffusion=DiffusionParams(scale=0.0),
        drift=DriftTable.constant(0.0),
    )


@pytest.fixture
def coarse_config():
    """Default model on a coarse grid for quick end-to-end runs."""
    return SimConfig(n=40, dt=0.1, seed=7)
