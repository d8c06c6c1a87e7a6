"""Per-individual random streams derived from (master seed, individual index)."""
from typing import Protocol

import numpy as np


class RandomStream(Protocol):
    """Source of the draws one simulated individual consumes."""

    def uniform(self) -> float:
        """A draw from the open interval (0, 1)."""
        ...

    def standard_normals(self, size: int) -> np.ndarray:
        """``size`` independent standard-normal draws."""
        ...


class IndividualStream:
    """numpy Generator seeded with SeedSequence([seed, index]).

    The stream is independent of which worker or batch simulates the
    individual, so results do not depend on scheduling.
    """

    def __init__(self, seed: int, index: int):
        self.seed = seed
        self.index = index
        self._rng = np.random.default_rng(np.random.SeedSequence([seed, index]))

    def uniform(self) -> float:
        u = self._rng.random()
        while u <= 0.0:
            u = self._rng.random()
        return float(u)

    def standard_normals(self, size: int) -> np.ndarray:
        return self._rng.standard_normal(size)


def make_stream(seed: int, index: int) -> IndividualStream:
    """Factory for the substream of individual ``index``."""
    return IndividualStream(seed, index)
