"""Drift, diffusion and the Euler-Maruyama step of the HRQoL SDE.

    dX_t = X_t * delta_bar(t) dt + scale * sqrt((1 - X_t) X_t) dB_t

Every function accepts a scalar or a numpy array for the state ``x`` so the
same code advances one individual or a whole batch.
"""
import math
from typing import Union

import numpy as np

from core.config import DiffusionParams, DriftTable

FloatOrArray = Union[float, np.ndarray]


def eval_delta_bar(t: float, table: DriftTable) -> float:
    """Linear interpolation in the drift table, clamped outside the knot range."""
    return float(np.interp(t, table.ages, table.values))


def drift_b(t: float, x: FloatOrArray, table: DriftTable) -> FloatOrArray:
    """Drift b(t, x) = x * delta_bar(t)."""
    return x * eval_delta_bar(t, table)


def diffusion_sigma(x: FloatOrArray, params: DiffusionParams) -> FloatOrArray:
    """Diffusion scale * sqrt((1 - x) x), zero at both boundaries."""
    # max(0, .) absorbs round-off just outside [0, 1]
    return params.scale * np.sqrt(np.maximum(0.0, (1.0 - x) * x))


def em_step(
    t: float,
    x: FloatOrArray,
    dt: float,
    z: FloatOrArray,
    table: DriftTable,
    params: DiffusionParams,
) -> FloatOrArray:
    """One explicit Euler-Maruyama step, clamped to [0, 1].

    Args:
        t: Age at which the drift factor is evaluated
        x: HRQoL at the start of the step
        dt: Step size in years
        z: Standard-normal draw(s); the Brownian increment is sqrt(dt) * z
        table: Drift factor table
        params: Diffusion parameters

    Returns:
        HRQoL at the end of the step
    """
    increment = drift_b(t, x, table) * dt + diffusion_sigma(x, params) * np.sqrt(dt) * z
    return np.clip(x + increment, 0.0, 1.0)


def exponential_em_step(
    t: float,
    x: FloatOrArray,
    dt: float,
    z: FloatOrArray,
    table: DriftTable,
    params: DiffusionParams,
) -> FloatOrArray:
    """Euler-Maruyama step with the linear drift integrated exactly, clamped to [0, 1].

    The drift factor read at ``t`` is held over the step, so the drift part
    multiplies x by exp(delta_bar(t) * dt) instead of 1 + delta_bar(t) * dt.
    With a zero diffusion scale and ``t`` at the step midpoint, a
    piecewise-linear table whose knots sit on the grid is integrated without
    step-size error. The diffusion part is the explicit one of ``em_step``.
    """
    growth = math.exp(eval_delta_bar(t, table) * dt)
    noise = diffusion_sigma(x, params) * np.sqrt(dt) * z
    return np.clip(x * growth + noise, 0.0, 1.0)
