"""Result models for simulated individuals and populations."""
from typing import Any, Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.config import SimConfig

# Slack for round-off in the trajectory invariants.
_EPS = 1e-9


class Trajectory(BaseModel):
    """One individual's stopped HRQoL path."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    index: int = Field(description="Individual id within the population")
    times: np.ndarray = Field(description="Stored ages in years")
    values: np.ndarray = Field(description="Stopped-process HRQoL at the stored ages")
    tau: float = Field(description="Age of death in years")
    x_at_death: float = Field(description="HRQoL at the last grid point before death")
    haly: float = Field(description="Health adjusted life years")
    censored: bool = Field(default=False, description="Alive at the maximum age")

    @model_validator(mode="after")
    def _check_invariants(self) -> "Trajectory":
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same shape")
        if not np.all((self.values >= 0.0) & (self.values <= 1.0)):
            raise ValueError("HRQoL values must lie in [0, 1]")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not -_EPS <= self.haly <= self.tau + _EPS:
            raise ValueError(f"haly {self.haly} outside [0, tau={self.tau}]")
        return self


class QuantileTriple(BaseModel):
    """Median and quartiles of one population statistic."""
    model_config = ConfigDict(frozen=True)

    median: float
    q25: float
    q75: float

    @model_validator(mode="after")
    def _check_order(self) -> "QuantileTriple":
        if not self.q25 <= self.median <= self.q75:
            raise ValueError(f"quartiles out of order: {self.q25}, {self.median}, {self.q75}")
        return self


class PopulationSummary(BaseModel):
    """Median/IQR summaries of the simulated population."""
    model_config = ConfigDict(frozen=True)

    life_expectancy: QuantileTriple = Field(description="Age of death tau, years")
    hrqol_at_death: QuantileTriple = Field(description="HRQoL just before death")
    haly: QuantileTriple = Field(description="Health adjusted life years")
    n: int = Field(description="Number of individuals")
    censored: int = Field(default=0, description="Individuals still alive at omega")


class QuantileCurves(BaseModel):
    """Pointwise quantiles of the stopped process over the stored grid."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    ages: np.ndarray
    probs: tuple[float, ...]
    curves: np.ndarray = Field(description="One row per probability, one column per age")

    def curve(self, p: float) -> np.ndarray:
        """The curve for probability p."""
        try:
            return self.curves[self.probs.index(p)]
        except ValueError:
            raise KeyError(f"no quantile curve for p={p}") from None

    @property
    def q25(self) -> np.ndarray:
        return self.curve(0.25)

    @property
    def q50(self) -> np.ndarray:
        return self.curve(0.5)

    @property
    def q75(self) -> np.ndarray:
        return self.curve(0.75)


class PopulationResult(BaseModel):
    """All trajectories of a run plus the derived summaries."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    config: SimConfig
    trajectories: List[Trajectory]
    summary: PopulationSummary
    curves: QuantileCurves

    @property
    def ages(self) -> np.ndarray:
        return self.curves.ages


class RunManifest(BaseModel):
    """Provenance of a run, written next to the summary statistics."""
    config: Dict[str, Any] = Field(description="Flat config document that reproduces the run")
    version: str = Field(description="Software version tag")
    runtime_seconds: float = Field(description="Wall-clock time of the simulate stage; writing is not included")
