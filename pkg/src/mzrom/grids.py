"""Uniform time grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = ["TimeGrid"]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_n = n*dt on [0, T] with N_T steps (N_T + 1 nodes).

    Parameters
    ----------
    horizon : float
        Final time T > 0.
    n_steps : int
        Number of steps N_T >= 1; the spacing is dt = T / N_T.
    """

    horizon: float
    n_steps: int
    dt: float = field(init=False)

    def __post_init__(self):
        if self.n_steps < 1:
            raise InvalidArgumentError(f"n_steps must be >= 1, got {self.n_steps}")
        if not self.horizon > 0:
            raise InvalidArgumentError(f"horizon must be > 0, got {self.horizon}")
        object.__setattr__(self, "dt", self.horizon / self.n_steps)

    @property
    def t0(self) -> float:
        return 0.0

    @property
    def nodes(self) -> np.ndarray:
        """Grid nodes t_0, ..., t_{N_T}."""
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def half_nodes(self) -> np.ndarray:
        """Interval midpoints t_{n+1/2}, n = 0, ..., N_T - 1."""
        return (np.arange(self.n_steps) + 0.5) * self.dt

    def refine(self, factor: int = 2) -> "TimeGrid":
        """Grid with the same horizon and ``factor`` times as many steps."""
        return TimeGrid(self.horizon, self.n_steps * factor)

    def is_refinement_of(self, coarse: "TimeGrid") -> bool:
        """True if this grid halves-or-finer the coarse grid with aligned nodes."""
        if not np.isclose(self.horizon, coarse.horizon):
            return False
        return self.n_steps % coarse.n_steps == 0
