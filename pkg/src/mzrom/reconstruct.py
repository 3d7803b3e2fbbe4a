"""Inverse problems: recover Markovian, memory and noise operators from data.

The greedy time-marching solvers share one piece of machinery: at step n
the residual of the discretized history-enriched model is

    target_n - R-term - (noise block) B_n^T - sum_j w_j S[n-j] K_j^T
             - dt * sum_i Gt[n-i] B_i^T

where ``S`` holds the scheme's memory-quadrature nodes, ``w_j`` the lag
weights and ``target`` the scheme's left-hand side.  Everything already
solved is folded into the right-hand side through two flat GEMMs over
reversed buffers, so a full greedy pass costs one small factorization plus
O(N_T^2) BLAS work and no per-step array copies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ensemble import SnapshotEnsemble
from .exceptions import InvalidArgumentError, RankDeficiencyError
from .krylov import lsqr
from .lstsq import (
    DEFAULT_RANK_TOL,
    DenseLsSolver,
    LsDiagnostics,
    design_diagnostics,
    machine_rank_tol,
)
from .operators import OperatorSequence, lag_weights

__all__ = [
    "ReconstructionReport",
    "solve_R_per_step",
    "solve_R_global",
    "solve_KB_greedy",
    "solve_finite_memory",
    "solve_partial_greedy",
    "solve_partial_regularized",
    "demo_nonstationary_illposedness",
    "model_residuals",
    "finite_memory_dense_operator",
]


@dataclass
class ReconstructionReport:
    """Solved operators plus solver diagnostics."""

    operators: OperatorSequence
    mode: str
    per_step_rank: Optional[list] = None
    residual_norms: Optional[np.ndarray] = None
    lsqr_iterations: Optional[np.ndarray] = None
    lambda_r: Optional[float] = None
    lambda_k: Optional[float] = None
    m_support: Optional[int] = None
    r_tilde: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)


class _SchemeView:
    """Scheme-resolved data arrays and known-history accumulators."""

    def __init__(self, ens: SnapshotEnsemble, scheme: str):
        self.ens = ens
        self.scheme = scheme
        grid = ens.grid
        self.dt = grid.dt
        self.nt = grid.n_steps
        self.d = ens.d
        self.d_tilde = ens.d_tilde
        self.lag_w = lag_weights(grid, scheme)
        dt = self.dt

        if scheme == "backward_euler":
            self.s_phi = ens.phi[1:]
            self.targets = ens.phi_dot[1:] - ens.g[1:]
            self.r_phi = ens.phi[1:]
            self.ft0 = ens.phi_tilde0 + dt * ens.g_tilde[0]
        elif scheme == "implicit_midpoint":
            self.s_phi = 0.5 * (ens.phi[:-1] + ens.phi[1:])
            self.targets = np.diff(ens.phi, axis=0) / dt - ens.g_half
            self.r_phi = self.s_phi
            self.ft0 = ens.phi_tilde0 + 0.5 * dt * ens.g_tilde[0]
        elif scheme == "forward_euler":
            self.s_phi = ens.phi[:-1]
            self.targets = ens.phi_dot[:-1] - ens.g[:-1]
            self.r_phi = ens.phi[:-1]
            self.ft0 = ens.phi_tilde0 + dt * ens.g_tilde[0]
        else:
            raise InvalidArgumentError(f"unknown scheme {scheme!r}")

        ns = ens.n_traj
        # Reversed flat buffers: column block q of _s_rev holds S[nt-1-q], so
        # the lag-j sums at step n become one contiguous GEMM per step.
        self._s_rev = np.ascontiguousarray(
            self.s_phi[::-1].transpose(1, 0, 2).reshape(ns, self.nt * self.d)
        )
        self._kw_flat = np.zeros((self.nt * self.d, self.d))
        self._b_flat = np.zeros((self.nt * self.d_tilde, self.d))
        self._b_known_i0 = 1 if scheme == "forward_euler" else 0
        if ens.has_forcing:
            self._gt_rev = np.ascontiguousarray(
                ens.g_tilde[1:][::-1].transpose(1, 0, 2).reshape(ns, self.nt * self.d_tilde)
            )
        else:
            self._gt_rev = None

    @property
    def r_tilde_design(self) -> np.ndarray:
        ens = self.ens
        ens.require_full("the Markovian design with unresolved snapshots")
        if self.scheme == "backward_euler":
            return ens.phi_tilde[1:]
        if self.scheme == "implicit_midpoint":
            return 0.5 * (ens.phi_tilde[:-1] + ens.phi_tilde[1:])
        return ens.phi_tilde[:-1]

    def set_k(self, j: int, k_mat: np.ndarray):
        self._kw_flat[j * self.d : (j + 1) * self.d] = self.lag_w[j] * k_mat.T

    def set_k_scaled(self, j: int, x_block: np.ndarray):
        self._kw_flat[j * self.d : (j + 1) * self.d] = x_block

    def set_b(self, i: int, b_mat: np.ndarray):
        self._b_flat[i * self.d_tilde : (i + 1) * self.d_tilde] = b_mat.T

    def known_memory(self, n: int) -> np.ndarray:
        """sum_{j=0}^{n-1} w_j S[n-j] K_j^T using the already-set lags."""
        d, nt = self.d, self.nt
        return self._s_rev[:, (nt - 1 - n) * d : (nt - 1) * d] @ self._kw_flat[: n * d]

    def known_noise(self, n: int) -> np.ndarray:
        """dt * sum_{i=i0}^{n-1} Gt[n-i] B_i^T; zero without forcing."""
        if self._gt_rev is None:
            return 0.0
        dt_, nt = self.d_tilde, self.nt
        i0 = self._b_known_i0
        lo = (nt - n + i0) * dt_
        return self.dt * (self._gt_rev[:, lo : nt * dt_] @ self._b_flat[i0 * dt_ : n * dt_])


def _as_r_sequence(r_seq, nt: int, d: int) -> np.ndarray:
    r_seq = np.asarray(r_seq, dtype=float)
    if r_seq.shape == (d, d):
        return np.broadcast_to(r_seq, (nt, d, d))
    if r_seq.shape == (nt, d, d):
        return r_seq
    raise InvalidArgumentError(
        f"Markovian sequence must be ({d}, {d}) or ({nt}, {d}, {d}), got {r_seq.shape}"
    )


def solve_R_per_step(ens: SnapshotEnsemble, scheme: str, rank_tol: float = DEFAULT_RANK_TOL):
    """Per-step Markovian fits, one independent least squares per time level.

    Returns (R, R_tilde, diagnostics, residual_norms) where R has shape
    (N_T, d, d) and R_tilde (N_T, d, d_tilde).  Rank deficiency at a step is
    reported in the diagnostics and the minimum-norm solution is kept.
    """
    ens.require_full("per-step Markovian reconstruction")
    view = _SchemeView(ens, scheme)
    r_tilde_design = view.r_tilde_design
    nt, d, dt_ = view.nt, view.d, view.d_tilde
    R = np.empty((nt, d, d))
    Rt = np.empty((nt, d, dt_))
    diags = []
    resids = np.empty(nt)
    for n in range(nt):
        F = np.hstack([view.r_phi[n], r_tilde_design[n]])
        solver = DenseLsSolver(F, rank_tol)
        X = solver.solve(view.targets[n])
        R[n] = X[:d].T
        Rt[n] = X[d:].T
        diags.append(solver.diagnostics)
        resids[n] = np.linalg.norm(view.targets[n] - F @ X)
    return R, Rt, diags, resids


def solve_R_global(ens: SnapshotEnsemble, scheme: str, rank_tol: float = DEFAULT_RANK_TOL):
    """Single Markovian fit stacking every time level (time-invariant case).

    Returns (R, R_tilde, diagnostics) with R of shape (d, d).
    """
    ens.require_full("global Markovian reconstruction")
    view = _SchemeView(ens, scheme)
    ns = ens.n_traj
    nt, d, dt_ = view.nt, view.d, view.d_tilde
    F = np.hstack([
        view.r_phi.reshape(nt * ns, d),
        view.r_tilde_design.reshape(nt * ns, dt_),
    ])
    solver = DenseLsSolver(F, rank_tol)
    X = solver.solve(view.targets.reshape(nt * ns, d))
    return X[:d].T, X[d:].T, solver.diagnostics


def _check_noise_block(fac: DenseLsSolver, width: int):
    if fac.diagnostics.rank < width:
        raise RankDeficiencyError(
            "memory/noise design matrix is rank deficient "
            f"(rank {fac.diagnostics.rank} < {width}); the identifiability "
            "assumptions fail: the initial unresolved block must have "
            "positive smallest singular value and its range must intersect "
            "the resolved snapshot range trivially"
        )


def solve_KB_greedy(ens: SnapshotEnsemble, r_seq, scheme: str,
                    rank_tol: float = DEFAULT_RANK_TOL):
    """Greedy time-marching reconstruction of the memory and noise kernels.

    At step n only (K_n, B at node n) are solved; earlier lags stay frozen.
    The design matrix is time independent, so it is factored once and
    reused.  Returns (K, B, diagnostics, residual_norms).
    """
    ens.require_full("memory/noise reconstruction")
    view = _SchemeView(ens, scheme)
    nt, d, dt_ = view.nt, view.d, view.d_tilde
    r_all = _as_r_sequence(r_seq, nt, d)
    L = view.targets - np.matmul(view.r_phi, r_all.transpose(0, 2, 1))

    F = np.hstack([view.s_phi[0], view.ft0])
    fac = DenseLsSolver(F, rank_tol)
    _check_noise_block(fac, d + dt_)
    fac0 = None
    if view.lag_w[0] == 0.0:  # forward Euler: no lag-0 cell at the first step
        fac0 = DenseLsSolver(ens.phi_tilde0, rank_tol)

    K = np.zeros((nt, d, d))
    B = np.empty((nt, d, dt_))
    resids = np.empty(nt)
    for n in range(nt):
        Z = L[n] - view.known_memory(n) - view.known_noise(n)
        if n == 0 and fac0 is not None:
            X = fac0.solve(Z)
            B[0] = X.T
            view.set_b(0, B[0])
            resids[0] = np.linalg.norm(Z - ens.phi_tilde0 @ X)
            continue
        X = fac.solve(Z)
        K[n] = X[:d].T / view.lag_w[n]
        B[n] = X[d:].T
        view.set_k_scaled(n, X[:d])
        view.set_b(n, B[n])
        resids[n] = np.linalg.norm(Z - F @ X)
    return K, B, fac.diagnostics, resids


def solve_partial_greedy(ens: SnapshotEnsemble, scheme: str,
                         merge_r_into_k0: bool = True,
                         rank_tol: float = DEFAULT_RANK_TOL) -> ReconstructionReport:
    """Greedy reconstruction from resolved snapshots plus the initial
    unresolved slice only.

    With ``merge_r_into_k0`` (valid when the Markovian operator is constant
    in time) the current-state column is absorbed into the lag-0 kernel
    cell, which restores a unique minimizer; the stored R then holds the
    combined operator and K_0 is zero.  Without merging the three-block
    per-step designs are structurally rank deficient and the minimum-norm
    solution is returned with the deficiency recorded per step.
    """
    view = _SchemeView(ens, scheme)
    nt, d, dt_ = view.nt, view.d, view.d_tilde
    K = np.zeros((nt, d, d))
    B = np.empty((nt, d, dt_))
    R = np.empty((nt, d, d))
    diags = []
    resids = np.empty(nt)

    if merge_r_into_k0:
        if scheme == "forward_euler":
            raise InvalidArgumentError(
                "the merged solve needs a lag-0 memory cell, which the "
                "forward Euler quadrature does not have"
            )
        F = np.hstack([view.s_phi[0], view.ft0])
        fac = DenseLsSolver(F, rank_tol)
        _check_noise_block(fac, d + dt_)
        c0 = None
        for n in range(nt):
            Z = view.targets[n] - view.known_memory(n) - view.known_noise(n)
            if n == 0:
                X = fac.solve(Z)
                c0 = X[:d].T
            else:
                Z = Z - view.r_phi[n] @ c0.T
                X = fac.solve(Z)
                K[n] = X[:d].T / view.dt
                view.set_k_scaled(n, X[:d])
            R[n] = c0
            B[n] = X[d:].T
            view.set_b(n, B[n])
            diags.append(fac.diagnostics)
            resids[n] = np.linalg.norm(Z - F @ X)
        ops = OperatorSequence(ens.grid, scheme, R, K, B)
        return ReconstructionReport(
            operators=ops, mode="partial", per_step_rank=diags,
            residual_norms=resids, extra={"merged_lag0": True},
        )

    for n in range(nt):
        w = view.lag_w[n]
        if w == 0.0:  # forward Euler first step: R and B only
            F = np.hstack([view.r_phi[0], ens.phi_tilde0])
            solver = DenseLsSolver(F, rank_tol)
            Z = view.targets[0]
            X = solver.solve(Z)
            R[0] = X[:d].T
            B[0] = X[d:].T
        else:
            F = np.hstack([view.r_phi[n], view.s_phi[0], view.ft0])
            solver = DenseLsSolver(F, rank_tol)
            Z = view.targets[n] - view.known_memory(n) - view.known_noise(n)
            X = solver.solve(Z)
            R[n] = X[:d].T
            K[n] = X[d : 2 * d].T / w
            B[n] = X[2 * d :].T
            view.set_k_scaled(n, X[d : 2 * d])
        view.set_b(n, B[n])
        diags.append(solver.diagnostics)
        resids[n] = np.linalg.norm(Z - F @ X)
    ops = OperatorSequence(ens.grid, scheme, R, K, B)
    return ReconstructionReport(
        operators=ops, mode="partial", per_step_rank=diags,
        residual_norms=resids, extra={"merged_lag0": False},
    )


def solve_partial_regularized(ens: SnapshotEnsemble, lambda_r: float, lambda_k: float,
                              scheme: str = "implicit_midpoint",
                              rank_tol: float = DEFAULT_RANK_TOL) -> ReconstructionReport:
    """Partial-data reconstruction with time-smoothing penalties.

    Successive differences of the Markovian operator and of the memory
    kernel are penalized with weights sqrt(lambda_R) and sqrt(lambda_K).
    The first two steps couple through their shared unknowns and are solved
    as one system whose penalty rows act on the solver variables (the
    quadrature-scaled kernel cells); later steps march greedily with
    penalty anchors [sqrt(lambda_R) R_{n-1}; sqrt(lambda_K) K_{n-1}].  With
    positive weights every step has a unique minimizer, so the solves run
    untruncated; ``rank_tol`` only sets the reported numerical ranks.
    """
    if lambda_r < 0 or lambda_k < 0:
        raise InvalidArgumentError("regularization weights must be >= 0")
    if scheme == "forward_euler":
        raise InvalidArgumentError(
            "the regularized partial solve is defined for the implicit "
            "schemes (no lag-0 cell exists under forward Euler)"
        )
    view = _SchemeView(ens, scheme)
    nt, d, dt_ = view.nt, view.d, view.d_tilde
    if nt < 2:
        raise InvalidArgumentError("the coupled first step needs N_T >= 2")
    ns = ens.n_traj
    sr, sk = np.sqrt(lambda_r), np.sqrt(lambda_k)
    eye = np.eye(d)
    zr = np.zeros((ns, d))
    zt = np.zeros((ns, dt_))
    dt = view.dt
    gt1 = dt * ens.g_tilde[1] if ens.has_forcing else zt
    w0 = view.lag_w[0]

    # Coupled system for steps 0 and 1.  Solver variables are the scaled
    # kernel cells z_j = w_j K_j, so every design block is a plain snapshot
    # matrix: columns [R_a, R_b, z_0, z_1, B_a, B_b].
    row0 = np.hstack([view.r_phi[0], zr, view.s_phi[0], zr, view.ft0, zt])
    row1 = np.hstack([zr, view.r_phi[1], view.s_phi[1], view.s_phi[0], gt1, view.ft0])
    zd = np.zeros((d, d))
    zdt = np.zeros((d, dt_))
    pen_r = np.hstack([-sr * eye, sr * eye, zd, zd, zdt, zdt])
    pen_k = np.hstack([zd, zd, -sk * eye, sk * eye, zdt, zdt])
    F1 = np.vstack([row0, row1, pen_r, pen_k])
    Z1 = np.vstack([view.targets[0], view.targets[1], np.zeros((2 * d, d))])
    fac1 = DenseLsSolver(F1, machine_rank_tol(F1.shape))
    X = fac1.solve(Z1)

    K = np.zeros((nt, d, d))
    B = np.empty((nt, d, dt_))
    R = np.empty((nt, d, d))
    diags = [fac1.diagnostics_at(rank_tol)] * 2
    resids = np.empty(nt)
    R[0], R[1] = X[:d].T, X[d : 2 * d].T
    K[0] = X[2 * d : 3 * d].T / w0
    K[1] = X[3 * d : 4 * d].T / dt
    B[0], B[1] = X[4 * d : 4 * d + dt_].T, X[4 * d + dt_ :].T
    for j in (0, 1):
        view.set_k(j, K[j])
        view.set_b(j, B[j])
    full_res = Z1 - F1 @ X
    resids[0] = np.linalg.norm(full_res[:ns])
    resids[1] = np.linalg.norm(full_res[ns : 2 * ns])

    # Later steps: unknowns [R_{node n}, z_n = dt K_n, B_{node n}].  The
    # kernel anchor row pairs sqrt(lambda_K) z_n against the previous
    # unscaled kernel entry, exactly as the marching system is posed.
    pen_rows = np.vstack([
        np.hstack([sr * eye, zd, zdt]),
        np.hstack([zd, sk * eye, zdt]),
    ])
    F_data = np.hstack([np.empty((ns, d)), view.s_phi[0], view.ft0])
    for n in range(2, nt):
        F_data[:, :d] = view.r_phi[n]
        F = np.vstack([F_data, pen_rows])
        Z = np.vstack([
            view.targets[n] - view.known_memory(n) - view.known_noise(n),
            sr * R[n - 1].T,
            sk * K[n - 1].T,
        ])
        solver = DenseLsSolver(F, machine_rank_tol(F.shape))
        X = solver.solve(Z)
        R[n] = X[:d].T
        K[n] = X[d : 2 * d].T / dt
        B[n] = X[2 * d :].T
        view.set_k(n, K[n])
        view.set_b(n, B[n])
        diags.append(solver.diagnostics_at(rank_tol))
        resids[n] = np.linalg.norm(Z[:ns] - F[:ns] @ X)

    ops = OperatorSequence(ens.grid, scheme, R, K, B)
    return ReconstructionReport(
        operators=ops, mode="partial_regularized", per_step_rank=diags,
        residual_norms=resids, lambda_r=lambda_r, lambda_k=lambda_k,
    )


class _FiniteMemoryOperator:
    """Matrix-free block operator [Diag(noise block) | truncated Toeplitz]."""

    def __init__(self, view: _SchemeView, m: int):
        self.view = view
        self.nt, self.d, self.d_tilde = view.nt, view.d, view.d_tilde
        self.ns = view.ens.n_traj
        j0 = 1 if view.scheme == "forward_euler" else 0
        self.lags = list(range(j0, min(m, self.nt - 1) + 1))
        self.pt0 = view.ens.phi_tilde0
        self.s_flat = np.ascontiguousarray(view.s_phi.reshape(self.nt * self.ns, self.d))
        self.n_b = self.nt * self.d_tilde
        self.n_unknown = self.n_b + len(self.lags) * self.d
        self.m_rows = self.nt * self.ns

    def apply(self, x: np.ndarray) -> np.ndarray:
        p = x.shape[1]
        xb = x[: self.n_b].reshape(self.nt, self.d_tilde, p)
        y = np.matmul(self.pt0[None], xb).reshape(self.m_rows, p).copy()
        d, ns = self.d, self.ns
        for idx, j in enumerate(self.lags):
            zj = x[self.n_b + idx * d : self.n_b + (idx + 1) * d]
            y[j * ns :] += self.s_flat[: (self.nt - j) * ns] @ zj
        return y

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        p = y.shape[1]
        x = np.empty((self.n_unknown, p))
        y3 = y.reshape(self.nt, self.ns, p)
        x[: self.n_b] = np.matmul(self.pt0.T[None], y3).reshape(self.n_b, p)
        d, ns = self.d, self.ns
        for idx, j in enumerate(self.lags):
            x[self.n_b + idx * d : self.n_b + (idx + 1) * d] = (
                self.s_flat[: (self.nt - j) * ns].T @ y[j * ns :]
            )
        return x

    def dense(self) -> np.ndarray:
        """Materialized operator, for small-problem validation only."""
        F = np.zeros((self.m_rows, self.n_unknown))
        ns, d, dt_ = self.ns, self.d, self.d_tilde
        for n in range(self.nt):
            F[n * ns : (n + 1) * ns, n * dt_ : (n + 1) * dt_] = self.pt0
        for idx, j in enumerate(self.lags):
            col = self.n_b + idx * d
            for n in range(j, self.nt):
                F[n * ns : (n + 1) * ns, col : col + d] = self.view.s_phi[n - j]
        return F


def finite_memory_dense_operator(ens: SnapshotEnsemble, m: int, scheme: str):
    """Dense form of the finite-memory design matrix (small N_T only)."""
    view = _SchemeView(ens, scheme)
    op = _FiniteMemoryOperator(view, m)
    return op.dense(), op.lags


def solve_finite_memory(ens: SnapshotEnsemble, r_seq, m: int,
                        scheme: str = "implicit_midpoint", max_iter: int = 500,
                        atol: float = 1e-14) -> ReconstructionReport:
    """Global memory/noise solve with the kernel truncated beyond lag m.

    The truncation couples all time levels (a per-step march would ignore
    the rows past the memory window), so the whole block system is solved
    jointly with matrix-free LSQR; the design matrix is never materialized.
    Requires zero forcing.
    """
    ens.require_full("finite-memory reconstruction")
    if ens.has_forcing:
        raise InvalidArgumentError("the finite-memory solve assumes zero forcing")
    if not 0 < m <= ens.grid.n_steps:
        raise InvalidArgumentError(f"need 0 < m <= N_T, got m={m}")
    view = _SchemeView(ens, scheme)
    nt, d, dt_ = view.nt, view.d, view.d_tilde
    r_all = _as_r_sequence(r_seq, nt, d)
    L = (view.targets - np.matmul(view.r_phi, r_all.transpose(0, 2, 1))).reshape(
        nt * ens.n_traj, d
    )
    op = _FiniteMemoryOperator(view, m)
    result = lsqr(op.apply, op.apply_adjoint, L, op.n_unknown,
                  max_iter=max_iter, atol=atol)
    x = result.x
    B = x[: op.n_b].reshape(nt, dt_, d).transpose(0, 2, 1).copy()
    K = np.zeros((nt, d, d))
    for idx, j in enumerate(op.lags):
        K[j] = x[op.n_b + idx * d : op.n_b + (idx + 1) * d].T / view.lag_w[j]
    ops = OperatorSequence(ens.grid, scheme, r_all, K, B)
    return ReconstructionReport(
        operators=ops, mode="finite_memory", m_support=m,
        lsqr_iterations=result.iterations,
        residual_norms=result.residual_history[-1],
        extra={"lags": op.lags},
    )


def demo_nonstationary_illposedness(ens: SnapshotEnsemble, r_seq=None,
                                    rank_tol: float = DEFAULT_RANK_TOL,
                                    max_steps: Optional[int] = None):
    """Per-step rank report for the two-time-kernel design matrices.

    Dropping the lag-only (stationary) form makes every snapshot its own
    design block.  Because each snapshot matrix spans the same column space
    as the initial data, the stacked design [Phi_tilde_0, Phi_1, ...,
    Phi_{n+1}] stops gaining rank after the first step; the report shows
    the plateau.  ``r_seq`` is accepted for interface symmetry but the rank
    pattern does not depend on it.
    """
    del r_seq
    ens.require_full("the non-stationary design demo")
    nt = ens.grid.n_steps if max_steps is None else min(max_steps, ens.grid.n_steps)
    diags = []
    blocks = [ens.phi_tilde0]
    for n in range(nt):
        blocks.append(ens.phi[n + 1])
        diags.append(design_diagnostics(np.hstack(blocks), rank_tol))
    return diags


def model_residuals(ens: SnapshotEnsemble, ops: OperatorSequence) -> np.ndarray:
    """Per-step residuals of the discretized model for a given operator set.

    Evaluates the partial-data form (no separate unresolved Markovian
    term): target_n minus every reconstructed contribution, shape
    (N_T, n_traj, d).  Useful for consistency checks: exact operators give
    residuals of the size of the quadrature error.
    """
    view = _SchemeView(ens, ops.scheme)
    nt, d = view.nt, view.d
    for j in range(nt):
        view.set_k(j, ops.K[j])
        view.set_b(j, ops.B[j])
    out = np.empty((nt, ens.n_traj, d))
    for n in range(nt):
        res = view.targets[n] - view.r_phi[n] @ ops.R[n].T
        res -= view.known_memory(n) + view.lag_w[n] * (view.s_phi[0] @ ops.K[n].T)
        res -= view.known_noise(n)
        if n == 0 and view.lag_w[0] == 0.0:
            res -= ens.phi_tilde0 @ ops.B[0].T
        else:
            res -= view.ft0 @ ops.B[n].T
        out[n] = res
    return out
