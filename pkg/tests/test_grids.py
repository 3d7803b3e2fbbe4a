import numpy as np
import pytest

from mzrom import TimeGrid
from mzrom.exceptions import InvalidArgumentError
from mzrom.operators import OperatorSequence, lag_times, lag_weights, operator_nodes


def test_grid_nodes_uniform():
    grid = TimeGrid(5.0, 160)
    nodes = grid.nodes
    assert nodes.shape == (161,)
    assert nodes[0] == 0.0
    assert np.isclose(nodes[-1], 5.0)
    assert np.allclose(np.diff(nodes), grid.dt)
    assert grid.dt == 5.0 / 160


def test_grid_validation():
    with pytest.raises(InvalidArgumentError):
        TimeGrid(5.0, 0)
    with pytest.raises(InvalidArgumentError):
        TimeGrid(-1.0, 4)


def test_refinement_alignment():
    coarse = TimeGrid(5.0, 10)
    assert coarse.refine().is_refinement_of(coarse)
    assert not TimeGrid(4.0, 20).is_refinement_of(coarse)


def test_scheme_node_conventions():
    grid = TimeGrid(1.0, 4)
    assert np.allclose(operator_nodes(grid, "backward_euler"), [0.25, 0.5, 0.75, 1.0])
    assert np.allclose(operator_nodes(grid, "implicit_midpoint"), [0.125, 0.375, 0.625, 0.875])
    assert np.allclose(operator_nodes(grid, "forward_euler"), [0.0, 0.25, 0.5, 0.75])
    assert np.allclose(lag_times(grid), [0.0, 0.25, 0.5, 0.75])


def test_lag_weights_per_scheme():
    grid = TimeGrid(1.0, 4)
    assert np.allclose(lag_weights(grid, "backward_euler"), [0.25] * 4)
    assert np.allclose(lag_weights(grid, "implicit_midpoint"), [0.125, 0.25, 0.25, 0.25])
    assert np.allclose(lag_weights(grid, "forward_euler"), [0.0, 0.25, 0.25, 0.25])


def test_operator_sequence_checks_lengths():
    grid = TimeGrid(1.0, 3)
    ok = OperatorSequence(grid, "backward_euler", np.zeros((3, 2, 2)),
                          np.zeros((3, 2, 2)), np.zeros((3, 2, 4)))
    assert ok.d == 2 and ok.d_tilde == 4
    assert ok.time_offsets["R"] == "t_{n+1}"
    from mzrom.exceptions import ShapeError

    with pytest.raises(ShapeError):
        OperatorSequence(grid, "backward_euler", np.zeros((2, 2, 2)),
                         np.zeros((3, 2, 2)), np.zeros((3, 2, 4)))


def test_truncated_memory_zeroes_high_lags():
    grid = TimeGrid(1.0, 5)
    ops = OperatorSequence(grid, "implicit_midpoint", np.zeros((5, 1, 1)),
                           np.ones((5, 1, 1)), np.zeros((5, 1, 2)))
    cut = ops.with_truncated_memory(2)
    assert cut.K[:3].all() and not cut.K[3:].any()
    full = ops.with_truncated_memory(5)
    assert np.array_equal(full.K, ops.K)
