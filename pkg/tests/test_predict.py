import numpy as np
import pytest

from mzrom import (
    EnsembleGenConfig,
    OperatorSequence,
    PredictionInput,
    TimeGrid,
    exact_operators_time_invariant,
    history_cost_estimate,
    integrate_ensemble,
    predict,
)
from mzrom.exceptions import ShapeError, SingularFactorError


def _zero_ops(grid, d=2, d_tilde=3, scheme="backward_euler"):
    nt = grid.n_steps
    return OperatorSequence(grid, scheme, np.zeros((nt, d, d)),
                            np.zeros((nt, d, d)), np.zeros((nt, d, d_tilde)))


@pytest.mark.parametrize("scheme", ["backward_euler", "implicit_midpoint", "forward_euler"])
def test_zero_operators_freeze_state(scheme):
    grid = TimeGrid(1.0, 12)
    ops = _zero_ops(grid, scheme=scheme)
    phi0 = np.random.default_rng(0).standard_normal((4, 2))
    out = predict(PredictionInput(ops, phi0, np.zeros((4, 3))))
    assert np.allclose(out, phi0)


def test_rotation_oracle_second_order(rotation_system, rotation_proj):
    """With exact operators the midpoint march converges at second order to
    cos(t) phi0 + sin(t) phi_tilde0."""
    errs = []
    for nt in (250, 500):
        grid = TimeGrid(1.0, nt)
        ops = exact_operators_time_invariant(rotation_system, rotation_proj, grid,
                                             "implicit_midpoint")
        phi0 = np.array([[1.0], [0.3]])
        pt0 = np.array([[0.0], [-0.7]])
        out = predict(PredictionInput(ops, phi0, pt0))
        t = grid.nodes
        exact = np.cos(t)[:, None, None] * phi0 + np.sin(t)[:, None, None] * pt0
        errs.append(np.max(np.abs(out - exact)))
    ratio = errs[0] / errs[1]
    assert 3.4 < ratio < 4.6


def test_training_reproduction_matches_scheme_order(rotation_system, rotation_proj):
    """Oracle operators reproduce generated trajectories at the scheme order."""
    from mzrom import error_Phi

    results = {}
    for scheme in ("backward_euler", "forward_euler", "implicit_midpoint"):
        errs = []
        for nt in (100, 200):
            grid = TimeGrid(1.0, nt)
            f0 = np.random.default_rng(2).standard_normal((5, 2))
            ens = integrate_ensemble(rotation_system, rotation_proj, grid, f0,
                                     EnsembleGenConfig(n_traj=5))
            ops = exact_operators_time_invariant(rotation_system, rotation_proj,
                                                 grid, scheme)
            out = predict(PredictionInput(ops, ens.phi[0], ens.phi_tilde0))
            errs.append(error_Phi(out, ens.phi, grid, scheme))
        results[scheme] = errs[0] / errs[1]
    assert 3.4 < results["implicit_midpoint"] < 4.6
    assert 1.7 < results["backward_euler"] < 2.4
    assert 1.7 < results["forward_euler"] < 2.4


def test_prediction_linear_superposition(rda_a_pair):
    from mzrom import solve_KB_greedy, solve_R_global

    _, grid, ens, _ = rda_a_pair
    r, _, _ = solve_R_global(ens, "implicit_midpoint")
    k, b, _, _ = solve_KB_greedy(ens, r, "implicit_midpoint")
    ops = OperatorSequence(grid, "implicit_midpoint",
                           np.broadcast_to(r, (grid.n_steps, 5, 5)), k, b)
    rng = np.random.default_rng(4)
    p1, p2 = rng.standard_normal((2, 3, 5))
    q1, q2 = rng.standard_normal((2, 3, 25))
    out1 = predict(PredictionInput(ops, p1, q1))
    out2 = predict(PredictionInput(ops, p2, q2))
    combo = predict(PredictionInput(ops, p1 + p2, q1 + q2))
    scale = max(np.max(np.abs(out1)), np.max(np.abs(out2)))
    assert np.max(np.abs(combo - out1 - out2)) < 1e-12 * scale


def test_truncated_full_support_identical(rda_a_pair):
    from mzrom import solve_KB_greedy, solve_R_global

    _, grid, ens, ens_test = rda_a_pair
    r, _, _ = solve_R_global(ens, "implicit_midpoint")
    k, b, _, _ = solve_KB_greedy(ens, r, "implicit_midpoint")
    ops = OperatorSequence(grid, "implicit_midpoint",
                           np.broadcast_to(r, (grid.n_steps, 5, 5)), k, b)
    cut = ops.with_truncated_memory(grid.n_steps)
    a = predict(PredictionInput(ops, ens_test.phi[0], ens_test.phi_tilde0))
    bb = predict(PredictionInput(cut, ens_test.phi[0], ens_test.phi_tilde0))
    assert np.array_equal(a, bb)


def test_singular_factor_reported():
    grid = TimeGrid(1.0, 4)
    nt, d = grid.n_steps, 2
    r = np.zeros((nt, d, d))
    r[:] = np.eye(d) / grid.dt  # makes I - dt R exactly singular
    ops = OperatorSequence(grid, "backward_euler", r, np.zeros((nt, d, d)),
                           np.zeros((nt, d, 1)))
    with pytest.raises(SingularFactorError):
        predict(PredictionInput(ops, np.ones((1, 2)), np.ones((1, 1))))


def test_shape_validation():
    grid = TimeGrid(1.0, 3)
    ops = _zero_ops(grid)
    with pytest.raises(ShapeError):
        PredictionInput(ops, np.ones((2, 3)), np.ones((2, 3)))
    with pytest.raises(ShapeError):
        PredictionInput(ops, np.ones((2, 2)), np.ones((3, 3)))
    with pytest.raises(ShapeError):
        PredictionInput(ops, np.ones((2, 2)), np.ones((2, 3)), g=np.zeros((2, 2, 2)))


def test_history_cost_estimate_quadratic():
    base = history_cost_estimate(TimeGrid(1.0, 100), d=5)
    assert history_cost_estimate(TimeGrid(1.0, 200), d=5) == 4 * base
    assert history_cost_estimate(TimeGrid(1.0, 1), d=5) == 25.0
