"""Hazard-driven stopping time for the age of death.

The individual hazard is h(t) = exp(alpha + beta t) / sqrt(X_t). Death occurs
when the cumulative hazard first reaches an Exp(1) threshold, which is inverse
sampling of the survival distribution along the realised HRQoL path.
"""
import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from core.config import HazardParams

FloatOrArray = Union[float, np.ndarray]

# Hazard is evaluated here when a path sits at 0 before its death has fired.
X_FLOOR = 1e-6


@dataclass(frozen=True)
class HazardAccumulator:
    """Running cumulative hazard and the threshold it has to reach."""
    cumulative_hazard: FloatOrArray
    threshold: FloatOrArray


def baseline_hazard(t: FloatOrArray, params: HazardParams) -> FloatOrArray:
    """h0(t) = exp(alpha + beta t)."""
    return np.exp(params.alpha + params.beta * t)


def covariate_hazard(t: FloatOrArray, x: FloatOrArray, params: HazardParams) -> FloatOrArray:
    """h(t) = h0(t) / sqrt(x), with x floored at X_FLOOR."""
    return baseline_hazard(t, params) / np.sqrt(np.maximum(x, X_FLOOR))


def integrated_baseline_hazard(t: float, dt: float, params: HazardParams) -> float:
    """Exact integral of h0 over [t, t + dt]."""
    if params.beta == 0.0:
        return math.exp(params.alpha) * dt
    return math.exp(params.alpha + params.beta * t) * math.expm1(params.beta * dt) / params.beta


def step_hazard(t: float, x: FloatOrArray, dt: float, params: HazardParams) -> FloatOrArray:
    """Average hazard rate over [t, t + dt] with the covariate held at x.

    The baseline part is integrated exactly, so advancing the accumulator by
    ``step_hazard(...) * dt`` reproduces the closed-form cumulative hazard
    whenever x is constant.
    """
    rate = integrated_baseline_hazard(t, dt, params) / dt
    return rate / np.sqrt(np.maximum(x, X_FLOOR))


def draw_threshold(u: float) -> float:
    """Exp(1) threshold -ln(u) from a uniform draw in the open interval (0, 1)."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"uniform draw must lie in (0, 1), got {u}")
    return -math.log(u)


def advance_hazard(acc: HazardAccumulator, h: FloatOrArray, dt: float) -> HazardAccumulator:
    """Add h * dt to the cumulative hazard; the threshold is untouched."""
    return replace(acc, cumulative_hazard=acc.cumulative_hazard + h * dt)


def crossing_times(
    t: float,
    dt: float,
    lambda_before: FloatOrArray,
    lambda_after: FloatOrArray,
    threshold: FloatOrArray,
) -> np.ndarray:
    """Vectorised threshold crossing inside [t, t + dt]; NaN where not crossed."""
    before, after, level = np.broadcast_arrays(
        np.asarray(lambda_before, dtype=float),
        np.asarray(lambda_after, dtype=float),
        np.asarray(threshold, dtype=float),
    )
    span = after - before
    with np.errstate(divide="ignore", invalid="ignore"):
        fraction = np.where(span > 0.0, (level - before) / span, 0.0)
    fraction = np.clip(fraction, 0.0, 1.0)
    return np.where(after >= level, t + dt * fraction, np.nan)


def locate_death(
    t: float,
    dt: float,
    lambda_before: float,
    lambda_after: float,
    threshold: float,
) -> Optional[float]:
    """Death time within the step by linear interpolation of the cumulative hazard.

    Returns None when the threshold has not been reached by the end of the step.
    """
    tau = float(crossing_times(t, dt, lambda_before, lambda_after, threshold))
    return None if math.isnan(tau) else tau


def gompertz_survival_oracle(
    t: FloatOrArray,
    x_frozen: float,
    params: HazardParams,
) -> FloatOrArray:
    """Closed-form survival S(t) for a covariate frozen at x_frozen."""
    scale = math.sqrt(x_frozen)
    if params.beta == 0.0:
        cumulative = np.exp(params.alpha) * np.asarray(t, dtype=float) / scale
    else:
        cumulative = (np.exp(params.alpha + params.beta * np.asarray(t, dtype=float))
                      - math.exp(params.alpha)) / (params.beta * scale)
    return np.exp(-cumulative)


def gompertz_quantile(p: float, x_frozen: float, params: HazardParams) -> float:
    """Age by which a fraction p of a frozen-covariate cohort has died."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"probability must lie in [0, 1), got {p}")
    target = -math.log1p(-p) * math.sqrt(x_frozen)
    if params.beta == 0.0:
        return target / math.exp(params.alpha)
    return (math.log(math.exp(params.alpha) + params.beta * target) - params.alpha) / params.beta
