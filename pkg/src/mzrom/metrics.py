"""Relative error metrics, convergence rates and conditioning diagnostics.

Time integrals in the relative errors use the same quadrature as the
scheme's memory/noise terms: uniform weights on the one-sided rules, a
half cell at lag zero for the midpoint rule, and cell-averaged integrands
for trajectory errors under the midpoint rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ensemble import SnapshotEnsemble
from .exceptions import InvalidArgumentError, ShapeError, UndefinedMetricError
from .grids import TimeGrid
from .lstsq import DEFAULT_RANK_TOL, design_diagnostics
from .operators import OperatorSequence, lag_weights
from .projection import ProjectionSpec
from .systems import SystemSpec

__all__ = [
    "ErrorReport",
    "error_K",
    "error_R",
    "error_Phi",
    "convergence_rates",
    "ConditioningReport",
    "conditioning_diagnostics",
]


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors for one reconstruction at one resolution."""

    e_phi: float
    e_r: float
    e_k: Optional[float]
    reference_kind: str  # analytic | self_convergence
    quadrature: str  # scheme tag


def _weighted_rel_error(diff_sq: np.ndarray, ref_sq: np.ndarray, w: np.ndarray) -> float:
    denom = float(w @ ref_sq)
    if denom == 0.0:
        raise UndefinedMetricError("reference sequence has zero norm")
    return float(np.sqrt((w @ diff_sq) / denom))


def _aligned_subsample(fine: np.ndarray, n_fine: int, n_coarse: int, what: str) -> np.ndarray:
    if n_fine % n_coarse != 0:
        raise InvalidArgumentError(
            f"{what}: reference grid ({n_fine} steps) is not an integer "
            f"refinement of {n_coarse} steps"
        )
    return fine[:: n_fine // n_coarse]


def _pair_sequences(recon: OperatorSequence, ref: OperatorSequence, attr: str) -> np.ndarray:
    """Reference entries of ``attr`` subsampled onto the recon lag grid."""
    if recon.scheme != ref.scheme:
        raise InvalidArgumentError("sequences use different schemes")
    if ref.grid.n_steps == recon.grid.n_steps:
        return getattr(ref, attr)
    if attr != "K":
        raise InvalidArgumentError("only memory-kernel lags align across refinements")
    if not np.isclose(ref.grid.horizon, recon.grid.horizon):
        raise InvalidArgumentError("grids span different horizons")
    return _aligned_subsample(ref.K, ref.grid.n_steps, recon.grid.n_steps, "error_K")


def error_K(recon: OperatorSequence, ref: OperatorSequence) -> float:
    """Relative error in the memory kernel over the lag interval.

    The lag integral uses the right-point rule (cells evaluated at their
    larger lag), so the lag-0 entry never enters: the discrete lag-0 cell
    is a quadrature average over the first half cell rather than a point
    sample, and comparing it against the pointwise kernel would pollute a
    second-order metric with a first-order boundary artifact on stiff
    kernels.  ``ref`` may live on the same grid or on an aligned finer grid
    (the self-convergence reference), in which case its lags are
    subsampled.
    """
    ref_k = _pair_sequences(recon, ref, "K")
    w = np.full(recon.grid.n_steps, recon.grid.dt)
    w[0] = 0.0
    diff = np.sum((recon.K - ref_k) ** 2, axis=(1, 2))
    base = np.sum(ref_k**2, axis=(1, 2))
    return _weighted_rel_error(diff, base, w)


def error_R(recon: OperatorSequence, ref: OperatorSequence) -> float:
    """Relative error in the Markovian operator over the time interval."""
    ref_r = _pair_sequences(recon, ref, "R")
    w = np.full(recon.grid.n_steps, recon.grid.dt)
    diff = np.sum((recon.R - ref_r) ** 2, axis=(1, 2))
    base = np.sum(ref_r**2, axis=(1, 2))
    return _weighted_rel_error(diff, base, w)


def error_Phi(pred: np.ndarray, truth: np.ndarray, grid: TimeGrid, scheme: str) -> float:
    """Relative trajectory error with the scheme's time quadrature."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.shape[0] != grid.n_steps + 1:
        raise ShapeError(
            f"trajectory arrays must both be (N_T + 1, m, d); got {pred.shape} vs {truth.shape}"
        )
    if scheme == "implicit_midpoint":
        diff = 0.5 * ((pred[:-1] + pred[1:]) - (truth[:-1] + truth[1:]))
        base = 0.5 * (truth[:-1] + truth[1:])
    elif scheme == "backward_euler":
        diff = pred[1:] - truth[1:]
        base = truth[1:]
    elif scheme == "forward_euler":
        diff = pred[:-1] - truth[:-1]
        base = truth[:-1]
    else:
        raise InvalidArgumentError(f"unknown scheme {scheme!r}")
    w = np.full(grid.n_steps, grid.dt)
    return _weighted_rel_error(
        np.sum(diff**2, axis=(1, 2)), np.sum(base**2, axis=(1, 2)), w
    )


def convergence_rates(errors) -> list:
    """log2 ratios of successive errors under step halving.

    Entry i is log2(e_i / e_{i+1}); a non-positive error on either side
    makes the rate undefined and yields None (rendered as a dash).
    """
    errors = list(errors)
    rates = []
    for a, b in zip(errors, errors[1:]):
        if a is None or b is None or a <= 0 or b <= 0:
            rates.append(None)
        else:
            rates.append(float(np.log2(a / b)))
    return rates


@dataclass
class ConditioningReport:
    """Computed condition numbers against their growth-bound estimates.

    All condition numbers and bounds are stored as natural logarithms so
    that exponentially growing bounds never overflow.
    """

    grid: TimeGrid
    log_kappa_f0: float
    log_per_step: np.ndarray
    log_per_step_bound: np.ndarray
    log_global: float
    log_global_bound: float
    log_kb: float
    log_kb_bound: float
    lambda_times: np.ndarray
    lambda_max: np.ndarray
    lambda_min: np.ndarray
    assumption_full_rank_f0: bool
    assumption_sigma_min_noise: float
    assumption_trivial_intersection: bool
    exponent_slack: float = 0.01
    extra: dict = field(default_factory=dict)

    def bounds_hold(self) -> bool:
        """True if no computed condition number exceeds its slackened bound.

        The slack inflates the lambda-integral exponent of each bound by
        ``exponent_slack`` (quadrature headroom), plus the same fraction on
        the prefactor for roundoff.
        """

        def pad(log_bound):
            return self.exponent_slack * (
                np.abs(log_bound - self.log_kappa_f0) + np.abs(self.log_kappa_f0)
            )

        per = np.all(self.log_per_step <= self.log_per_step_bound + pad(self.log_per_step_bound))
        glob = self.log_global <= self.log_global_bound + pad(self.log_global_bound)
        kb = self.log_kb <= self.log_kb_bound + pad(self.log_kb_bound)
        return bool(per and glob and kb)


def _log_cond(matrix: np.ndarray) -> float:
    s = np.linalg.svd(matrix, compute_uv=False)
    smin = max(float(s[-1]), 1e-300)
    return float(np.log(s[0]) - np.log(smin))


def _logsumexp(values: np.ndarray) -> float:
    vmax = float(np.max(values))
    return vmax + float(np.log(np.sum(np.exp(values - vmax))))


def conditioning_diagnostics(
    sys: SystemSpec,
    ens: SnapshotEnsemble,
    proj: ProjectionSpec,
    refine: int = 10,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> ConditioningReport:
    """Condition numbers of the Markovian/memory designs vs growth bounds.

    The bounds follow from the extremal eigenvalues of the Hermitian part
    H(t) = (A + A*) / 2 through the norm-growth estimate for the flow; the
    lambda integrals are evaluated by composite trapezoid on a grid
    ``refine`` times finer than the snapshot grid.  Stated for zero
    forcing.
    """
    ens.require_full("conditioning diagnostics")
    if ens.has_forcing:
        raise InvalidArgumentError("the conditioning bounds assume zero forcing")
    grid = ens.grid
    nt = grid.n_steps
    ns = ens.n_traj

    fine = np.linspace(0.0, grid.horizon, refine * nt + 1)
    lam_max = np.empty(fine.size)
    lam_min = np.empty(fine.size)
    for i, t in enumerate(fine):
        a = sys.a_of_t(t)
        eigs = np.linalg.eigvalsh(0.5 * (a + a.T))
        lam_min[i], lam_max[i] = eigs[0], eigs[-1]
    h = fine[1] - fine[0]
    cum_max = np.concatenate([[0.0], np.cumsum(0.5 * h * (lam_max[1:] + lam_max[:-1]))])
    cum_min = np.concatenate([[0.0], np.cumsum(0.5 * h * (lam_min[1:] + lam_min[:-1]))])
    i_max = cum_max[refine::refine]  # integrals to t_1 .. t_{N_T}
    i_min = cum_min[refine::refine]

    f0 = np.hstack([ens.phi[0], ens.phi_tilde[0]])
    log_k_f0 = _log_cond(f0)

    log_per_step = np.empty(nt)
    for n in range(nt):
        log_per_step[n] = _log_cond(np.hstack([ens.phi[n + 1], ens.phi_tilde[n + 1]]))
    log_per_step_bound = log_k_f0 + (i_max - i_min)

    stacked = np.concatenate(
        [np.hstack([ens.phi[n + 1], ens.phi_tilde[n + 1]]) for n in range(nt)], axis=0
    )
    log_global = _log_cond(stacked)
    log_global_bound = log_k_f0 + 0.5 * (_logsumexp(2.0 * i_max) - _logsumexp(2.0 * i_min))

    kb = np.hstack([ens.phi[1], ens.phi_tilde[0]])
    log_kb = _log_cond(kb)
    log_kb_bound = log_k_f0 + max(i_max[0], 0.0) - min(i_min[0], 0.0)

    noise_block = ens.phi_tilde[0] + grid.dt * ens.g_tilde[0]
    d_f0 = design_diagnostics(f0, rank_tol)
    d_join = design_diagnostics(np.hstack([ens.phi[0], noise_block]), rank_tol)
    sigma_noise = design_diagnostics(noise_block, rank_tol).sigma_min

    return ConditioningReport(
        grid=grid,
        log_kappa_f0=log_k_f0,
        log_per_step=log_per_step,
        log_per_step_bound=log_per_step_bound,
        log_global=log_global,
        log_global_bound=log_global_bound,
        log_kb=log_kb,
        log_kb_bound=log_kb_bound,
        lambda_times=fine,
        lambda_max=lam_max,
        lambda_min=lam_min,
        assumption_full_rank_f0=d_f0.rank == proj.n_full,
        assumption_sigma_min_noise=float(sigma_noise),
        assumption_trivial_intersection=d_join.rank == proj.n_full,
        extra={"n_traj": ns},
    )
