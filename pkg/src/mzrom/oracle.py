"""Ground-truth operators computed from a known system.

For a time-invariant system the memory and noise kernels have the closed
forms K(tau) = Rt expm(Ut tau) U and B(t) = Rt expm(Ut t), built from the
coupling blocks of the full operator.  For time-varying systems the
non-stationary kernel K(t, s) = Rt(t) E(t, s) U(s) is available through a
cached propagator of the unresolved sub-dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .exceptions import InvalidArgumentError
from .generate import _Rk4IntervalStepper
from .grids import TimeGrid
from .operators import OperatorSequence, operator_nodes
from .projection import ProjectionSpec, extract_blocks
from .systems import SystemSpec

__all__ = [
    "exact_operators_time_invariant",
    "build_propagator",
    "nonstationary_kernel",
    "PropagatorCache",
]


def exact_operators_time_invariant(
    sys: SystemSpec, proj: ProjectionSpec, grid: TimeGrid, scheme: str
) -> OperatorSequence:
    """Closed-form operator sequence for a time-invariant system.

    Entries are evaluated at the scheme's node convention: the memory
    kernel at integer lags for every scheme, the noise kernel at t_{n+1},
    t_{n+1/2} or t_n for backward Euler, implicit midpoint and forward
    Euler respectively.
    """
    if not sys.time_invariant:
        raise InvalidArgumentError("exact operators require a time-invariant system")
    a0 = sys.a_of_t(0.0)
    r, rt, u, ut = extract_blocks(a0, proj)
    nt = grid.n_steps
    d, d_tilde = proj.d, proj.d_tilde

    K = np.empty((nt, d, d))
    B = np.empty((nt, d, d_tilde))
    R = np.broadcast_to(r, (nt, d, d)).copy()

    e_dt = expm(grid.dt * ut)
    # Powers of e_dt give E at integer lags; the half-step factor shifts the
    # noise kernel onto half nodes when needed.
    e_lag = np.eye(d_tilde)
    if scheme == "backward_euler":
        shift = e_dt
    elif scheme == "implicit_midpoint":
        shift = expm(0.5 * grid.dt * ut)
    else:
        shift = np.eye(d_tilde)
    for i in range(nt):
        K[i] = rt @ e_lag @ u
        B[i] = rt @ (shift @ e_lag)
        e_lag = e_lag @ e_dt
    if scheme == "forward_euler":
        K[0] = 0.0  # lag 0 never enters the left-point quadrature
    return OperatorSequence(grid, scheme, R, K, B)


@dataclass(frozen=True)
class PropagatorCache:
    """Increments of the unresolved-dynamics propagator over grid intervals.

    ``increments[n]`` is E(t_{n+1}, t_n) for the sub-dynamics generated by
    the unresolved diagonal block of A(t); ``prefix[n]`` is E(t_n, 0).
    """

    grid: TimeGrid
    increments: np.ndarray
    prefix: np.ndarray

    def propagator(self, i: int, j: int) -> np.ndarray:
        """E(t_i, t_j) for node indices i >= j, composed from increments."""
        if not 0 <= j <= i <= self.grid.n_steps:
            raise InvalidArgumentError(f"need 0 <= j <= i <= N_T, got i={i}, j={j}")
        if j == 0:
            return self.prefix[i]
        out = np.eye(self.increments.shape[1])
        for k in range(j, i):
            out = self.increments[k] @ out
        return out


class _UnresolvedBlockSystem:
    """Adapter presenting the unresolved block of A(t) as a SystemSpec-alike."""

    def __init__(self, sys: SystemSpec, proj: ProjectionSpec):
        self._sys = sys
        self._proj = proj
        self.label = f"{sys.label}:unresolved-propagator"

    def a_of_t(self, t):
        return extract_blocks(self._sys.a_of_t(t), self._proj)[3]

    def forcing_rows(self, t, f0):
        return None


def build_propagator(
    sys: SystemSpec,
    proj: ProjectionSpec,
    grid: TimeGrid,
    *,
    solver_tol: float = 1e-12,
    substep_cap: int = 1 << 16,
) -> PropagatorCache:
    """Compute per-interval propagator increments of the unresolved dynamics."""
    d_tilde = proj.d_tilde
    nt = grid.n_steps
    increments = np.empty((nt, d_tilde, d_tilde))
    if sys.time_invariant:
        inc = expm(grid.dt * extract_blocks(sys.a_of_t(0.0), proj)[3])
        increments[:] = inc
    else:
        sub = _UnresolvedBlockSystem(sys, proj)
        stepper = _Rk4IntervalStepper(sub, None, solver_tol, substep_cap)
        nodes = grid.nodes
        eye = np.eye(d_tilde)
        for n in range(nt):
            # Integrate dE/dt = Ut(t) E columnwise; rows-of-E^T convention
            # matches the trajectory integrator (u rows, A acting right).
            inc_t = stepper.advance(nodes[n], nodes[n + 1], eye)
            increments[n] = inc_t.T
    prefix = np.empty((nt + 1, d_tilde, d_tilde))
    prefix[0] = np.eye(d_tilde)
    for n in range(nt):
        prefix[n + 1] = increments[n] @ prefix[n]
    return PropagatorCache(grid=grid, increments=increments, prefix=prefix)


def nonstationary_kernel(
    sys: SystemSpec,
    proj: ProjectionSpec,
    cache: PropagatorCache,
    i: int,
    j: int,
) -> np.ndarray:
    """Two-time memory kernel K(t_i, t_j) = Rt(t_i) E(t_i, t_j) U(t_j)."""
    if j > i:
        raise InvalidArgumentError(f"need s <= t, got node indices j={j} > i={i}")
    nodes = cache.grid.nodes
    rt = extract_blocks(sys.a_of_t(nodes[i]), proj)[1]
    u = extract_blocks(sys.a_of_t(nodes[j]), proj)[2]
    return rt @ cache.propagator(i, j) @ u
