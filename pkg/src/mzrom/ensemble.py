"""Snapshot ensembles: trajectory data on a uniform grid.

All data matrices follow the row-per-trajectory convention: entry (i, j) of
a snapshot matrix is variable j of trajectory i.  Arrays are frozen after
construction; nothing downstream mutates an ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError, ShapeError
from .grids import TimeGrid

__all__ = ["SnapshotEnsemble", "mask_partial"]


@dataclass(frozen=True)
class SnapshotEnsemble:
    """Resolved/unresolved snapshots, exact derivatives and forcings.

    Shapes (N_T = grid.n_steps, ``s`` = number of trajectories):

    - ``phi``:       (N_T + 1, s, d)        resolved snapshots
    - ``phi_tilde``: (N_T + 1, s, d_tilde)  unresolved snapshots, or
                     (1, s, d_tilde) in partial mode (initial slice only)
    - ``phi_dot``:   (N_T + 1, s, d)        exact resolved derivatives
    - ``g``:         (N_T + 1, s, d)        resolved forcing at the nodes
    - ``g_tilde``:   (N_T + 1, s, d_tilde)  unresolved forcing at the nodes
    - ``g_half``:    (N_T, s, d)            resolved forcing at half nodes
    """

    grid: TimeGrid
    phi: np.ndarray
    phi_tilde: np.ndarray
    phi_dot: np.ndarray
    g: np.ndarray
    g_tilde: np.ndarray
    g_half: np.ndarray
    observation_mode: str = "full"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.observation_mode not in ("full", "partial"):
            raise InvalidArgumentError(
                f"observation_mode must be 'full' or 'partial', got {self.observation_mode!r}"
            )
        nt = self.grid.n_steps
        arrays = {}
        for name in ("phi", "phi_tilde", "phi_dot", "g", "g_tilde", "g_half"):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            arrays[name] = arr
        ns, d = arrays["phi"].shape[1], arrays["phi"].shape[2]
        dt_ = arrays["phi_tilde"].shape[2]
        expect = {
            "phi": (nt + 1, ns, d),
            "phi_dot": (nt + 1, ns, d),
            "g": (nt + 1, ns, d),
            "g_tilde": (nt + 1, ns, dt_),
            "g_half": (nt, ns, d),
        }
        expect["phi_tilde"] = ((nt + 1, ns, dt_) if self.observation_mode == "full"
                               else (1, ns, dt_))
        for name, shape in expect.items():
            if arrays[name].shape != shape:
                raise ShapeError(
                    f"{name} has shape {arrays[name].shape}, expected {shape}"
                )
        for arr in arrays.values():
            arr.flags.writeable = False
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def n_traj(self) -> int:
        return self.phi.shape[1]

    @property
    def d(self) -> int:
        return self.phi.shape[2]

    @property
    def d_tilde(self) -> int:
        return self.phi_tilde.shape[2]

    @property
    def phi_tilde0(self) -> np.ndarray:
        """Unresolved initial snapshot, available in both observation modes."""
        return self.phi_tilde[0]

    @property
    def has_forcing(self) -> bool:
        key = "_has_forcing"
        if key not in self.meta:
            self.meta[key] = bool(np.any(self.g) or np.any(self.g_tilde))
        return self.meta[key]

    def require_full(self, what: str):
        if self.observation_mode != "full":
            raise InvalidArgumentError(f"{what} requires full observation data")


def mask_partial(ens: SnapshotEnsemble) -> SnapshotEnsemble:
    """Drop unresolved snapshots beyond t = 0 (partial observation data)."""
    if ens.observation_mode == "partial":
        return ens
    return SnapshotEnsemble(
        grid=ens.grid,
        phi=ens.phi,
        phi_tilde=ens.phi_tilde[:1],
        phi_dot=ens.phi_dot,
        g=ens.g,
        g_tilde=ens.g_tilde,
        g_half=ens.g_half,
        observation_mode="partial",
        meta=dict(ens.meta),
    )
