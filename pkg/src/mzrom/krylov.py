"""Matrix-free LSQR (Golub-Kahan bidiagonalization).

Multiple right-hand sides are handled column by column; the columns never
couple, so their recurrences are carried in lock-step as vectorized scalar
arrays.  Convergence uses the normal-equation criterion
||F^T r|| / (||F|| ||r||) < atol with the running Frobenius estimate of
||F|| accumulated from the bidiagonalization, as in Paige & Saunders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import AdjointConsistencyError, ShapeError

__all__ = ["lsqr", "LsqrResult", "check_adjoint_pair"]


@dataclass
class LsqrResult:
    x: np.ndarray
    iterations: np.ndarray
    residual_history: np.ndarray

    @property
    def max_iterations(self) -> int:
        return int(self.iterations.max()) if self.iterations.size else 0


def check_adjoint_pair(apply_f, apply_f_adjoint, m: int, n: int, rtol: float = 1e-8):
    """Random inner-product test <F v, u> == <v, F^T u> for an operator pair."""
    rng = np.random.default_rng(12345)
    v = rng.standard_normal((n, 1))
    u = rng.standard_normal((m, 1))
    fv = np.asarray(apply_f(v))
    ftu = np.asarray(apply_f_adjoint(u))
    lhs = float(fv[:, 0] @ u[:, 0])
    rhs = float(v[:, 0] @ ftu[:, 0])
    scale = max(abs(lhs), abs(rhs), np.linalg.norm(fv) * np.linalg.norm(u), 1e-300)
    if abs(lhs - rhs) > rtol * scale:
        raise AdjointConsistencyError(
            f"adjoint inner-product mismatch: <Fv,u>={lhs:.6e} vs <v,F'u>={rhs:.6e}"
        )


def lsqr(apply_f, apply_f_adjoint, z, n: int, max_iter: int = 500,
         atol: float = 1e-14, *, check_adjoint: bool = True) -> LsqrResult:
    """Solve min ||z - F x|| for the matrix-free operator pair.

    Parameters
    ----------
    apply_f, apply_f_adjoint : callables
        Act on (n, p) and (m, p) column blocks respectively.
    z : array, shape (m,) or (m, p)
        Right-hand side(s); columns are solved independently.
    n : int
        Domain dimension of F.
    max_iter : int
        Iteration cap.
    atol : float
        Normal-equation stopping tolerance.

    Returns
    -------
    LsqrResult with ``x`` of shape (n,) or (n, p) matching the input,
    per-column iteration counts and the per-iteration residual norms.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    if single:
        z = z[:, None]
    if z.ndim != 2:
        raise ShapeError(f"z must be 1-D or 2-D, got shape {z.shape}")
    m, p = z.shape
    if check_adjoint:
        check_adjoint_pair(apply_f, apply_f_adjoint, m, n)

    x = np.zeros((n, p))
    u = z.copy()
    beta = np.linalg.norm(u, axis=0)
    nonzero = beta > 0
    u[:, nonzero] /= beta[nonzero]
    v = np.asarray(apply_f_adjoint(u))
    alpha = np.linalg.norm(v, axis=0)
    nz = alpha > 0
    v[:, nz] /= alpha[nz]
    w = v.copy()
    phi_bar = beta.copy()
    rho_bar = alpha.copy()
    norm_f2 = alpha**2
    active = (beta > 0) & (alpha > 0)
    iterations = np.zeros(p, dtype=int)
    history = [phi_bar.copy()]

    for it in range(1, max_iter + 1):
        if not active.any():
            break
        u = np.asarray(apply_f(v)) - alpha * u
        beta = np.linalg.norm(u, axis=0)
        nz = beta > 0
        u[:, nz] /= beta[nz]
        v = np.asarray(apply_f_adjoint(u)) - beta * v
        alpha = np.linalg.norm(v, axis=0)
        nz = alpha > 0
        v[:, nz] /= alpha[nz]
        norm_f2 = norm_f2 + alpha**2 + beta**2

        rho = np.hypot(rho_bar, beta)
        c = rho_bar / rho
        s = beta / rho
        theta = s * alpha
        rho_bar = -c * alpha
        phi = c * phi_bar
        phi_bar = s * phi_bar

        step = np.where(active, phi / rho, 0.0)
        x += step * w
        w = v - (theta / rho) * w

        iterations[active] = it
        history.append(phi_bar.copy())

        # ||F^T r|| / (||F|| ||r||) = alpha |c| / ||F||  (phi_bar = ||r||)
        arnorm_rel = alpha * np.abs(c) / np.sqrt(np.maximum(norm_f2, 1e-300))
        converged = arnorm_rel <= atol
        breakdown = (beta == 0) | (alpha == 0)
        active = active & ~converged & ~breakdown

    result_x = x[:, 0] if single else x
    return LsqrResult(
        x=result_x,
        iterations=iterations if not single else iterations[:1],
        residual_history=np.asarray(history),
    )
