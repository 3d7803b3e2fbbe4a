"""Dense minimum-norm least squares with rank diagnostics.

All inverse problems in the package reduce to multi-right-hand-side
problems min ||Z - F X||_F.  Solves go through the SVD so that the
minimum-Frobenius-norm solution, the numerical rank and the extreme
singular values all come from one factorization; reruns are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidArgumentError, ShapeError

__all__ = ["LeastSquaresProblem", "LsDiagnostics", "solve_dense_ls", "DenseLsSolver"]

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class LeastSquaresProblem:
    """A dense problem min ||Z - F X||_F with a relative rank threshold."""

    F: np.ndarray
    Z: np.ndarray
    rank_tol: float = DEFAULT_RANK_TOL

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        Z = np.asarray(self.Z, dtype=float)
        if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
            raise ShapeError(f"F must be a nonempty 2-D array, got shape {F.shape}")
        if Z.shape[0] != F.shape[0]:
            raise ShapeError(f"Z has {Z.shape[0]} rows, F has {F.shape[0]}")
        if not 0.0 < self.rank_tol < 1.0:
            raise InvalidArgumentError(f"rank_tol must lie in (0, 1), got {self.rank_tol}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "Z", Z)


@dataclass(frozen=True)
class LsDiagnostics:
    """Numerical rank and singular-value extremes of a design matrix."""

    rank: int
    sigma_min: float
    sigma_max: float

    @property
    def cond(self) -> float:
        if self.sigma_min == 0.0:
            return np.inf
        return self.sigma_max / self.sigma_min


class DenseLsSolver:
    """SVD factorization of a design matrix, reusable across right-hand sides.

    Directions below ``rank_tol * sigma_max`` are truncated from the solve;
    pass ``machine_rank_tol(F.shape)`` to keep everything representable
    (the classical untruncated pseudoinverse, as unstable as the problem).
    """

    def __init__(self, F: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL):
        F = np.asarray(F, dtype=float)
        if F.ndim != 2:
            raise ShapeError(f"F must be 2-D, got shape {F.shape}")
        u, s, vt = np.linalg.svd(F, full_matrices=False)
        smax = s[0] if s.size else 0.0
        keep = s > rank_tol * smax
        self._ut = np.ascontiguousarray(u[:, keep].T)
        self._v_scaled = vt[keep].T / s[keep]
        self._s = s
        self.diagnostics = LsDiagnostics(
            rank=int(np.count_nonzero(keep)),
            sigma_min=float(s[-1]) if s.size else 0.0,
            sigma_max=float(smax),
        )
        self.shape = F.shape

    def diagnostics_at(self, rank_tol: float) -> LsDiagnostics:
        """Rank report at a different threshold, reusing the factorization."""
        s, smax = self._s, self.diagnostics.sigma_max
        return LsDiagnostics(
            rank=int(np.count_nonzero(s > rank_tol * smax)),
            sigma_min=self.diagnostics.sigma_min,
            sigma_max=smax,
        )

    def solve(self, Z: np.ndarray) -> np.ndarray:
        """Minimum-norm solution for one or more right-hand-side columns."""
        return self._v_scaled @ (self._ut @ Z)


def machine_rank_tol(shape) -> float:
    """LAPACK-style relative threshold keeping all representable directions."""
    return float(np.finfo(float).eps) * max(shape)


def solve_dense_ls(problem: LeastSquaresProblem):
    """Solve one dense problem; returns (X, diagnostics).

    Rank deficiency is reported through the diagnostics, never raised: the
    returned X is the unique minimum-Frobenius-norm minimizer either way.
    """
    solver = DenseLsSolver(problem.F, problem.rank_tol)
    return solver.solve(problem.Z), solver.diagnostics


def design_diagnostics(F: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL) -> LsDiagnostics:
    """Rank/extreme-singular-value report for a matrix without solving."""
    s = np.linalg.svd(np.asarray(F, dtype=float), compute_uv=False)
    smax = s[0] if s.size else 0.0
    return LsDiagnostics(
        rank=int(np.count_nonzero(s > rank_tol * smax)),
        sigma_min=float(s[-1]) if s.size else 0.0,
        sigma_max=float(smax),
    )
