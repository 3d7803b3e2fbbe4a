"""Time marching of the reconstructed history-enriched model.

The forward updates are the exact algebraic rearrangements of the discrete
model residuals used by the reconstruction module, so operators that fit
the data exactly reproduce trajectories to roundoff.  History sums are
evaluated by direct accumulation over reversed contiguous buffers (one
GEMM per step, no copies); at the scales handled here the quadratic cost
is trivial and keeps quadrature weights scheme-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .exceptions import InvalidArgumentError, ShapeError, SingularFactorError
from .grids import TimeGrid
from .operators import OperatorSequence

__all__ = ["PredictionInput", "predict", "history_cost_estimate"]


@dataclass(frozen=True)
class PredictionInput:
    """Initial data and forcing for a batch of predicted trajectories.

    ``g`` and ``g_tilde`` hold node values (N_T + 1, m, d / d_tilde) and
    ``g_half`` the resolved forcing at half nodes; all three may be None
    for unforced systems.
    """

    ops: OperatorSequence
    phi0: np.ndarray
    phi_tilde0: np.ndarray
    g: Optional[np.ndarray] = None
    g_tilde: Optional[np.ndarray] = None
    g_half: Optional[np.ndarray] = None

    def __post_init__(self):
        phi0 = np.atleast_2d(np.asarray(self.phi0, dtype=float))
        pt0 = np.atleast_2d(np.asarray(self.phi_tilde0, dtype=float))
        if phi0.shape[1] != self.ops.d or pt0.shape[1] != self.ops.d_tilde:
            raise ShapeError(
                f"initial data ({phi0.shape[1]}, {pt0.shape[1]}) does not match "
                f"operator dimensions ({self.ops.d}, {self.ops.d_tilde})"
            )
        if phi0.shape[0] != pt0.shape[0]:
            raise ShapeError("phi0 and phi_tilde0 must have the same row count")
        nt = self.ops.grid.n_steps
        for name, arr, width in (
            ("g", self.g, self.ops.d),
            ("g_tilde", self.g_tilde, self.ops.d_tilde),
        ):
            if arr is not None and np.asarray(arr).shape != (nt + 1, phi0.shape[0], width):
                raise ShapeError(f"{name} must have shape ({nt + 1}, {phi0.shape[0]}, {width})")
        if self.g_half is not None and np.asarray(self.g_half).shape != (
            nt, phi0.shape[0], self.ops.d,
        ):
            raise ShapeError(f"g_half must have shape ({nt}, {phi0.shape[0]}, {self.ops.d})")
        object.__setattr__(self, "phi0", phi0)
        object.__setattr__(self, "phi_tilde0", pt0)


class _ImplicitFactor:
    """LU of the implicit step matrix, refactored only when R changes."""

    def __init__(self, build, r_seq: np.ndarray):
        self._build = build
        self._constant = bool(np.all(r_seq == r_seq[0]))
        self._cached = None

    def solve(self, n: int, rhs_rows: np.ndarray) -> np.ndarray:
        if self._cached is None or not self._constant:
            m = self._build(n)
            if not np.all(np.isfinite(m)):
                raise SingularFactorError(
                    f"implicit factor has non-finite entries at step {n}"
                )
            sv = np.linalg.svd(m, compute_uv=False)
            if sv[-1] <= 1e-13 * max(sv[0], 1.0):
                raise SingularFactorError(
                    f"implicit factor singular at step {n}: sigma_min = {sv[-1]:.3e}"
                )
            self._cached = lu_factor(m)
        return lu_solve(self._cached, rhs_rows.T).T


def predict(inp: PredictionInput) -> np.ndarray:
    """March the model over its grid; returns (N_T + 1, m, d) resolved states."""
    ops = inp.ops
    grid: TimeGrid = ops.grid
    nt, dt = grid.n_steps, grid.dt
    d, d_tilde = ops.d, ops.d_tilde
    m_rows = inp.phi0.shape[0]
    scheme = ops.scheme
    eye = np.eye(d)

    k_flat = np.ascontiguousarray(ops.K.transpose(0, 2, 1).reshape(nt * d, d))
    b_flat = np.ascontiguousarray(ops.B.transpose(0, 2, 1).reshape(nt * d_tilde, d))

    # Reversed state buffer: block (nt - p) holds state p, filled backward so
    # every history sum is one contiguous slice.
    x_rev = np.zeros((m_rows, (nt + 1) * d))
    xh_rev = np.zeros((m_rows, nt * d)) if scheme == "implicit_midpoint" else None
    gt_rev = None
    if inp.g_tilde is not None and np.any(inp.g_tilde):
        gt_rev = np.ascontiguousarray(
            np.asarray(inp.g_tilde)[::-1].transpose(1, 0, 2).reshape(m_rows, (nt + 1) * d_tilde)
        )

    out = np.empty((nt + 1, m_rows, d))
    out[0] = inp.phi0
    x_rev[:, nt * d : (nt + 1) * d] = inp.phi0

    gt0 = inp.g_tilde[0] if inp.g_tilde is not None else 0.0
    if scheme == "backward_euler":
        noise0 = inp.phi_tilde0 + dt * gt0
    elif scheme == "implicit_midpoint":
        noise0 = inp.phi_tilde0 + 0.5 * dt * gt0
    else:
        noise0 = inp.phi_tilde0

    if scheme == "backward_euler":
        factor = _ImplicitFactor(lambda n: eye - dt * ops.R[n] - dt * dt * ops.K[0], ops.R)
    elif scheme == "implicit_midpoint":
        factor = _ImplicitFactor(
            lambda n: eye - 0.5 * dt * ops.R[n] - 0.25 * dt * dt * ops.K[0], ops.R
        )

    def hist_k(n: int) -> np.ndarray:
        """sum over lags j = 1..n of (state history) @ K_j^T."""
        if n == 0:
            return 0.0
        cols = k_flat[d : (n + 1) * d]
        if scheme == "implicit_midpoint":
            return xh_rev[:, (nt - n) * d : nt * d] @ cols
        if scheme == "backward_euler":
            return x_rev[:, (nt - n) * d : nt * d] @ cols
        return x_rev[:, (nt - n + 1) * d : (nt + 1) * d] @ cols

    def hist_b(n: int) -> np.ndarray:
        """sum over past noise nodes of (forcing history) @ B_i^T.

        The current-node cell is merged into ``noise0`` for the implicit
        schemes, so their block range is i = 0..n-1; forward Euler keeps
        i = 1..n instead (its forcing history reaches back to t_0).
        """
        if gt_rev is None:
            return 0.0
        lo = 0 if scheme != "forward_euler" else 1
        hi = n if scheme != "forward_euler" else n + 1
        if hi <= lo:
            return 0.0
        base = nt - n  # g_tilde[n - i] sits at reversed block nt - n + i
        sl = gt_rev[:, (base + lo) * d_tilde : (base + hi) * d_tilde]
        return sl @ b_flat[lo * d_tilde : hi * d_tilde]

    x_n = inp.phi0
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(nt):
            if scheme == "forward_euler":
                rhs = x_n + dt * (x_n @ ops.R[n].T + noise0 @ ops.B[n].T)
                if inp.g is not None:
                    rhs = rhs + dt * inp.g[n]
                x_next = rhs + dt * dt * (hist_k(n) + hist_b(n))
            else:
                if scheme == "backward_euler":
                    rhs = x_n + dt * (noise0 @ ops.B[n].T)
                    if inp.g is not None:
                        rhs = rhs + dt * inp.g[n + 1]
                else:
                    p_mat = eye + 0.5 * dt * ops.R[n] + 0.25 * dt * dt * ops.K[0]
                    rhs = x_n @ p_mat.T + dt * (noise0 @ ops.B[n].T)
                    if inp.g_half is not None:
                        rhs = rhs + dt * inp.g_half[n]
                rhs = rhs + dt * dt * (hist_k(n) + hist_b(n))
                if not np.all(np.isfinite(rhs)):
                    out[n + 1 :] = np.inf  # model diverged; report it, don't raise
                    break
                x_next = factor.solve(n, rhs)
            out[n + 1] = x_next
            x_rev[:, (nt - n - 1) * d : (nt - n) * d] = x_next
            if xh_rev is not None:
                xh_rev[:, (nt - 1 - n) * d : (nt - n) * d] = 0.5 * (x_n + x_next)
            x_n = x_next
    return out


def history_cost_estimate(grid: TimeGrid, d: int) -> float:
    """Flop-scale estimate of the memory-convolution work per trajectory.

    The history sums cost one length-n kernel contraction per step, so the
    total grows quadratically in the step count.
    """
    if d < 1 or grid.n_steps < 1:
        raise InvalidArgumentError("need d >= 1 and at least one step")
    return float(d) * float(d) * float(grid.n_steps) ** 2
