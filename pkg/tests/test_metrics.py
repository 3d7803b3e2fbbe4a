import numpy as np
import pytest
from scipy.linalg import expm

from mzrom import (
    OperatorSequence,
    TimeGrid,
    conditioning_diagnostics,
    convergence_rates,
    error_K,
    error_Phi,
    error_R,
)
from mzrom.exceptions import UndefinedMetricError


def _const_ops(grid, r=0.0, k=1.0, b=0.5, d=2, scheme="implicit_midpoint"):
    nt = grid.n_steps
    return OperatorSequence(
        grid, scheme,
        np.full((nt, d, d), r), np.full((nt, d, d), k), np.full((nt, d, d + 1), b),
    )


def test_zero_errors_on_identical_sequences():
    grid = TimeGrid(1.0, 8)
    ops = _const_ops(grid)
    assert error_K(ops, ops) == 0.0
    assert error_R(_const_ops(grid, r=2.0), _const_ops(grid, r=2.0)) == 0.0


def test_scaling_by_two_gives_unit_error():
    grid = TimeGrid(1.0, 8)
    ref = _const_ops(grid, k=1.0)
    recon = _const_ops(grid, k=2.0)
    assert np.isclose(error_K(recon, ref), 1.0)


def test_constant_mismatch_ratio():
    grid = TimeGrid(2.0, 16)
    truth = np.ones((17, 3, 2))
    pred = truth + 1e-3
    assert np.isclose(error_Phi(pred, truth, grid, "implicit_midpoint"), 1e-3)
    assert np.isclose(error_Phi(pred, truth, grid, "backward_euler"), 1e-3)


def test_zero_reference_raises():
    grid = TimeGrid(1.0, 4)
    ref = _const_ops(grid, k=0.0)
    with pytest.raises(UndefinedMetricError):
        error_K(_const_ops(grid, k=1.0), ref)


def test_error_k_subsamples_fine_reference():
    coarse = TimeGrid(1.0, 8)
    fine = TimeGrid(1.0, 16)
    rng = np.random.default_rng(0)
    k_fine = rng.standard_normal((16, 2, 2))
    ref = OperatorSequence(fine, "implicit_midpoint", np.zeros((16, 2, 2)),
                           k_fine, np.zeros((16, 2, 3)))
    recon = OperatorSequence(coarse, "implicit_midpoint", np.zeros((8, 2, 2)),
                             k_fine[::2], np.zeros((8, 2, 3)))
    assert error_K(recon, ref) == 0.0


def test_error_k_ignores_lag_zero():
    grid = TimeGrid(1.0, 8)
    ref = _const_ops(grid, k=1.0)
    k = np.full((8, 2, 2), 1.0)
    k[0] = 77.0  # the lag-0 cell is a half-cell average, never sampled
    recon = OperatorSequence(grid, "implicit_midpoint", ref.R, k, ref.B)
    assert error_K(recon, ref) == 0.0


def test_rates_exact_on_geometric_sequences():
    assert convergence_rates([4.0, 1.0]) == [2.0]
    rates = convergence_rates([8e-2, 2e-2, 5e-3])
    assert np.allclose(rates, [2.0, 2.0])
    assert convergence_rates([1e-2, 0.0]) == [None]
    assert convergence_rates([1e-2]) == []


def test_conditioning_skew_symmetric_flow(rotation_proj):
    """H = 0: the per-step condition numbers equal the initial one."""
    from mzrom import EnsembleGenConfig, integrate_ensemble
    from tests.conftest import make_constant_system

    sys_ = make_constant_system([[0.0, 1.0], [-1.0, 0.0]])
    grid = TimeGrid(2.0, 16)
    f0 = np.random.default_rng(1).standard_normal((6, 2))
    ens = integrate_ensemble(sys_, rotation_proj, grid, f0, EnsembleGenConfig(n_traj=6))
    rep = conditioning_diagnostics(sys_, ens, rotation_proj)
    # orthogonal flow preserves singular values: computed equals the bound
    assert np.max(np.abs(rep.log_per_step - rep.log_kappa_f0)) < 1e-8
    assert np.max(np.abs(rep.log_per_step_bound - rep.log_kappa_f0)) < 1e-10
    assert np.all(rep.log_per_step <= rep.log_per_step_bound + 1e-8)
    assert rep.log_global <= rep.log_global_bound + 1e-8
    assert rep.assumption_full_rank_f0
    assert rep.assumption_trivial_intersection
    assert rep.assumption_sigma_min_noise > 0


def test_conditioning_bounds_random_stable_systems():
    """Computed condition numbers never exceed the growth bounds."""
    rng = np.random.default_rng(7)
    worst = -np.inf
    for trial in range(50):
        n, d = 6, 2
        a = rng.standard_normal((n, n))
        a -= (np.max(np.linalg.eigvals(0.5 * (a + a.T)).real) + 0.3) * np.eye(n)
        f0 = rng.standard_normal((9, n))
        grid = TimeGrid(1.0, 5)
        # exact snapshots of the flow, stacked per node
        nt = grid.n_steps
        states = np.empty((nt + 1, 9, n))
        for i, t in enumerate(grid.nodes):
            states[i] = f0 @ expm(t * a).T
        from mzrom import ProjectionSpec, SnapshotEnsemble
        from tests.conftest import make_constant_system

        proj = ProjectionSpec(n, tuple(range(d)))
        ens = SnapshotEnsemble(
            grid=grid, phi=states[:, :, :d], phi_tilde=states[:, :, d:],
            phi_dot=np.einsum("tsj,ij->tsi", states, a)[:, :, :d],
            g=np.zeros((nt + 1, 9, d)), g_tilde=np.zeros((nt + 1, 9, n - d)),
            g_half=np.zeros((nt, 9, d)),
        )
        rep = conditioning_diagnostics(make_constant_system(a), ens, proj)
        assert rep.bounds_hold(), f"bound violated on trial {trial}"
        worst = max(worst, np.max(rep.log_per_step - rep.log_per_step_bound))
    assert worst <= 0.05


def test_conditioning_rejects_forced_data(rda_proj):
    from mzrom import EnsembleGenConfig, generate_ensemble, get_system
    from mzrom.exceptions import InvalidArgumentError

    sys_ = get_system("rda:g", 30)
    ens = generate_ensemble(sys_, rda_proj, TimeGrid(0.5, 4),
                            EnsembleGenConfig(n_traj=35, seed=0))
    with pytest.raises(InvalidArgumentError):
        conditioning_diagnostics(sys_, ens, rda_proj)
