"""Coordinate splitting into resolved and unresolved components.

The projections select components of the state vector: the resolved part
keeps the chosen indices (in the given order) and the unresolved part keeps
the complement in ascending order.  Both parts are stored compactly, not as
zero-padded full-length vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidArgumentError, ShapeError

__all__ = ["ProjectionSpec", "split", "merge", "extract_blocks", "reassemble_blocks"]


@dataclass(frozen=True)
class ProjectionSpec:
    """Resolved/unresolved split of an N-dimensional state.

    Parameters
    ----------
    n_full : int
        Full state dimension N.
    resolved_indices : tuple[int, ...]
        Distinct, sorted indices of the resolved components; 1 <= d < N.
    """

    n_full: int
    resolved_indices: tuple
    unresolved_indices: tuple = field(init=False)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.resolved_indices)
        if len(idx) == 0 or len(idx) >= self.n_full:
            raise InvalidArgumentError(
                f"need 1 <= d < N, got d={len(idx)}, N={self.n_full}"
            )
        if len(set(idx)) != len(idx):
            raise InvalidArgumentError("resolved indices must be distinct")
        if list(idx) != sorted(idx):
            raise InvalidArgumentError("resolved indices must be sorted")
        if idx[0] < 0 or idx[-1] >= self.n_full:
            raise InvalidArgumentError("resolved indices out of range")
        object.__setattr__(self, "resolved_indices", idx)
        comp = tuple(i for i in range(self.n_full) if i not in set(idx))
        object.__setattr__(self, "unresolved_indices", comp)

    @property
    def d(self) -> int:
        return len(self.resolved_indices)

    @property
    def d_tilde(self) -> int:
        return self.n_full - self.d

    def _res(self) -> np.ndarray:
        return np.asarray(self.resolved_indices, dtype=int)

    def _unres(self) -> np.ndarray:
        return np.asarray(self.unresolved_indices, dtype=int)


def split(u: np.ndarray, proj: ProjectionSpec):
    """Split a state vector (or rows-of-states matrix) into (resolved, unresolved).

    For 2-D input the split acts on the last axis (columns are state
    components, rows are trajectories).
    """
    u = np.asarray(u)
    if u.shape[-1] != proj.n_full:
        raise ShapeError(
            f"state has {u.shape[-1]} components, projection expects {proj.n_full}"
        )
    return u[..., proj._res()], u[..., proj._unres()]


def merge(resolved: np.ndarray, unresolved: np.ndarray, proj: ProjectionSpec) -> np.ndarray:
    """Inverse of :func:`split`; reproduces the original vector exactly."""
    resolved = np.asarray(resolved)
    unresolved = np.asarray(unresolved)
    if resolved.shape[-1] != proj.d or unresolved.shape[-1] != proj.d_tilde:
        raise ShapeError("component counts do not match the projection")
    out = np.empty(resolved.shape[:-1] + (proj.n_full,), dtype=np.result_type(resolved, unresolved))
    out[..., proj._res()] = resolved
    out[..., proj._unres()] = unresolved
    return out


def extract_blocks(a: np.ndarray, proj: ProjectionSpec):
    """Extract the four coupling blocks of a full-state operator.

    Returns
    -------
    (r, r_tilde, u, u_tilde) :
        ``r`` maps resolved -> resolved (d x d), ``r_tilde`` unresolved ->
        resolved (d x d_tilde), ``u`` resolved -> unresolved (d_tilde x d)
        and ``u_tilde`` unresolved -> unresolved (d_tilde x d_tilde).
    """
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] != proj.n_full:
        raise ShapeError(
            f"matrix size {a.shape[0]} does not match projection N={proj.n_full}"
        )
    res, unres = proj._res(), proj._unres()
    return (
        a[np.ix_(res, res)],
        a[np.ix_(res, unres)],
        a[np.ix_(unres, res)],
        a[np.ix_(unres, unres)],
    )


def reassemble_blocks(r, r_tilde, u, u_tilde, proj: ProjectionSpec) -> np.ndarray:
    """Rebuild the full matrix from its four blocks (inverse of extract)."""
    n = proj.n_full
    out = np.empty((n, n), dtype=np.result_type(r, r_tilde, u, u_tilde))
    res, unres = proj._res(), proj._unres()
    out[np.ix_(res, res)] = r
    out[np.ix_(res, unres)] = r_tilde
    out[np.ix_(unres, res)] = u
    out[np.ix_(unres, unres)] = u_tilde
    return out
