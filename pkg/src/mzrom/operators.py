"""Discrete operator sequences and time-discretization conventions.

Three discretizations of the history-enriched model are supported.  They
differ in where the instantaneous operator and noise kernel live and in the
quadrature weights applied to the memory kernel lags:

``backward_euler``
    R and B at the nodes t_{n+1}; right-point memory quadrature (uniform
    weight dt for every lag, including lag 0).
``implicit_midpoint``
    R and B at the half nodes t_{n+1/2}; composite midpoint memory
    quadrature with a half cell at lag 0 (weight dt/2).
``forward_euler``
    R and B at the nodes t_n; left-point memory quadrature, which never
    touches lag 0 (weight 0 there, so K_0 is not identifiable and is kept
    zero by convention).

The memory kernel itself is always indexed by integer lag: entry j lives at
lag j*dt regardless of scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError, ShapeError
from .grids import TimeGrid

__all__ = [
    "SCHEMES",
    "OperatorSequence",
    "lag_weights",
    "operator_nodes",
    "lag_times",
]

SCHEMES = ("backward_euler", "implicit_midpoint", "forward_euler")

_OFFSETS = {
    "backward_euler": {"R": "t_{n+1}", "K": "lag t_n", "B": "t_{n+1}"},
    "implicit_midpoint": {"R": "t_{n+1/2}", "K": "lag t_n", "B": "t_{n+1/2}"},
    "forward_euler": {"R": "t_n", "K": "lag t_n", "B": "t_n"},
}


def _check_scheme(scheme: str):
    if scheme not in SCHEMES:
        raise InvalidArgumentError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def lag_weights(grid: TimeGrid, scheme: str) -> np.ndarray:
    """Quadrature weight of each memory-kernel lag 0 .. N_T - 1."""
    _check_scheme(scheme)
    w = np.full(grid.n_steps, grid.dt)
    if scheme == "implicit_midpoint":
        w[0] = 0.5 * grid.dt
    elif scheme == "forward_euler":
        w[0] = 0.0
    return w


def operator_nodes(grid: TimeGrid, scheme: str) -> np.ndarray:
    """Times at which the stored R and B entries live, index n = 0 .. N_T - 1."""
    _check_scheme(scheme)
    if scheme == "backward_euler":
        return grid.nodes[1:]
    if scheme == "implicit_midpoint":
        return grid.half_nodes
    return grid.nodes[:-1]


def lag_times(grid: TimeGrid) -> np.ndarray:
    """Lag values j*dt of the stored memory-kernel entries."""
    return np.arange(grid.n_steps) * grid.dt


@dataclass(frozen=True)
class OperatorSequence:
    """Discrete Markovian, memory and noise operators on one grid.

    Arrays are stacked along the step index: ``R`` has shape (N_T, d, d),
    ``K`` (N_T, d, d) and ``B`` (N_T, d, d_tilde), with the node/lag meaning
    of each index recorded in :attr:`time_offsets`.
    """

    grid: TimeGrid
    scheme: str
    R: np.ndarray
    K: np.ndarray
    B: np.ndarray
    time_offsets: dict = field(init=False)

    def __post_init__(self):
        _check_scheme(self.scheme)
        R = np.ascontiguousarray(np.asarray(self.R, dtype=float))
        K = np.ascontiguousarray(np.asarray(self.K, dtype=float))
        B = np.ascontiguousarray(np.asarray(self.B, dtype=float))
        nt = self.grid.n_steps
        if R.shape[:1] != (nt,) or K.shape[:1] != (nt,) or B.shape[:1] != (nt,):
            raise ShapeError(
                f"operator sequences must have length N_T={nt}; got "
                f"{R.shape[0]}, {K.shape[0]}, {B.shape[0]}"
            )
        d = R.shape[1]
        if R.shape[1:] != (d, d) or K.shape[1:] != (d, d):
            raise ShapeError("R and K entries must be d x d")
        if B.ndim != 3 or B.shape[1] != d:
            raise ShapeError("B entries must be d x d_tilde")
        for arr in (R, K, B):
            arr.flags.writeable = False
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "time_offsets", dict(_OFFSETS[self.scheme]))

    @property
    def d(self) -> int:
        return self.R.shape[1]

    @property
    def d_tilde(self) -> int:
        return self.B.shape[2]

    def with_truncated_memory(self, m: int) -> "OperatorSequence":
        """Copy with K_j = 0 for every lag j > m."""
        if not 0 < m <= self.grid.n_steps:
            raise InvalidArgumentError(f"need 0 < m <= N_T, got m={m}")
        K = self.K.copy()
        K[m + 1 :] = 0.0
        return OperatorSequence(self.grid, self.scheme, self.R, K, self.B)

    def markovian_only(self) -> "OperatorSequence":
        """Copy with K = B = 0 (memoryless baseline model)."""
        return OperatorSequence(
            self.grid, self.scheme, self.R, np.zeros_like(self.K), np.zeros_like(self.B)
        )
