"""Configuration settings for the HRQoL simulator."""
import math
import os
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

# Oldest age a drift knot may sit at.
MAX_SUPPORTED_AGE = 150.0

# Calibrated against the published population medians and IQRs
# (life expectancy, HRQoL at death, HALY) at x0=0.95, dt=0.01.
DEFAULT_DRIFT_KNOTS: tuple[tuple[float, float], ...] = (
    (0.0, 0.0),
    (45.0, -0.002),
    (65.0, -0.009),
    (80.0, -0.022),
    (90.0, -0.045),
    (110.0, -0.06),
)

DEFAULT_SEED = 20230613


class DriftTable(BaseModel):
    """Piecewise-linear table of the age-dependent drift factor."""
    model_config = ConfigDict(frozen=True)

    knots: tuple[tuple[float, float], ...] = Field(
        default=DEFAULT_DRIFT_KNOTS,
        description="(age in years, per-year rate) pairs with strictly increasing ages"
    )

    _ages: tuple[float, ...] = PrivateAttr()
    _values: tuple[float, ...] = PrivateAttr()

    @field_validator("knots")
    @classmethod
    def _check_knots(cls, knots: tuple[tuple[float, float], ...]) -> tuple[tuple[float, float], ...]:
        if not knots:
            raise ValueError("drift table needs at least one knot")
        ages = [age for age, _ in knots]
        for age, value in knots:
            if not (math.isfinite(age) and 0.0 <= age <= MAX_SUPPORTED_AGE):
                raise ValueError(f"knot age {age} outside [0, {MAX_SUPPORTED_AGE}]")
            if not math.isfinite(value):
                raise ValueError(f"knot value at age {age} is not finite")
        if any(b <= a for a, b in zip(ages, ages[1:])):
            raise ValueError("knot ages must be strictly increasing")
        return knots

    def model_post_init(self, __context) -> None:
        self._ages = tuple(float(age) for age, _ in self.knots)
        self._values = tuple(float(value) for _, value in self.knots)

    @property
    def ages(self) -> np.ndarray:
        return np.asarray(self._ages)

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self._values)

    @classmethod
    def constant(cls, value: float) -> "DriftTable":
        """Table with a single knot, i.e. the same rate at every age."""
        return cls(knots=((0.0, value),))


class DiffusionParams(BaseModel):
    """Scale of the bounded diffusion term."""
    model_config = ConfigDict(frozen=True)

    scale: float = Field(
        default=0.05,
        ge=0.0,
        allow_inf_nan=False,
        description="Dimensionless factor in front of sqrt((1 - x) x)"
    )


class HazardParams(BaseModel):
    """Gompertz-form baseline hazard exp(alpha + beta t)."""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(
        default=-11.175,
        allow_inf_nan=False,
        description="Log-hazard intercept"
    )

    beta: float = Field(
        default=0.1,
        ge=0.0,
        allow_inf_nan=False,
        description="Log-hazard slope per year of age"
    )


class SimConfig(BaseModel):
    """All knobs of one simulation run."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    n: int = Field(
        default=1000,
        ge=1,
        description="Number of simulated individuals"
    )

    dt: float = Field(
        default=0.01,
        gt=0.0,
        allow_inf_nan=False,
        description="Euler-Maruyama step size in years"
    )

    omega: float = Field(
        default=110.0,
        gt=0.0,
        le=MAX_SUPPORTED_AGE,
        allow_inf_nan=False,
        description="Maximum age; survivors are censored here"
    )

    x0: float = Field(
        default=0.95,
        gt=0.0,
        le=1.0,
        description="HRQoL at age 0"
    )

    seed: int = Field(
        default=DEFAULT_SEED,
        ge=0,
        lt=2**64,
        description="Master seed for per-individual substreams"
    )

    hazard: HazardParams = Field(
        default_factory=HazardParams,
        description="Baseline hazard coefficients"
    )

    diffusion: DiffusionParams = Field(
        default_factory=DiffusionParams,
        description="Diffusion scale"
    )

    drift: DriftTable = Field(
        default_factory=DriftTable,
        description="Age-dependent drift factor table"
    )

    @model_validator(mode="after")
    def _check_grid(self) -> "SimConfig":
        steps = round(self.omega / self.dt)
        if steps < 1 or abs(steps * self.dt - self.omega) > 1e-9 * max(1.0, self.omega):
            raise ValueError(f"omega/dt must be an integer (omega={self.omega}, dt={self.dt})")
        return self

    @property
    def n_steps(self) -> int:
        """Number of Euler-Maruyama steps on [0, omega]."""
        return round(self.omega / self.dt)


class RuntimeConfig(BaseModel):
    """Execution settings; none of them changes simulated values."""
    workers: int = Field(
        default=1,
        ge=0,
        description="Worker processes (0 uses every CPU)"
    )

    batch_size: int = Field(
        default=512,
        ge=1,
        description="Individuals advanced together in one vectorised batch"
    )

    record_every: int = Field(
        default=1,
        ge=1,
        description="Store every k-th grid point of each path"
    )

    timeout_seconds: Optional[float] = Field(
        default=None,
        gt=0.0,
        description="Wall-clock limit for the whole run; the simulation stops at the next batch boundary"
    )

    quiet: bool = Field(
        default=False,
        description="Suppress progress messages"
    )

    @property
    def resolved_workers(self) -> int:
        return self.workers or (os.cpu_count() or 1)

    @classmethod
    def from_env(cls) -> "RuntimeConfig":
        """Create runtime settings from environment variables."""
        timeout = os.getenv("HRQOL_TIMEOUT")
        return cls(
            workers=int(os.getenv("HRQOL_WORKERS", "1")),
            batch_size=int(os.getenv("HRQOL_BATCH_SIZE", "512")),
            record_every=int(os.getenv("HRQOL_RECORD_EVERY", "1")),
            timeout_seconds=float(timeout) if timeout else None,
            quiet=os.getenv("HRQOL_QUIET", "false").lower() == "true"
        )
