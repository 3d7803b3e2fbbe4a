import numpy as np
import pytest

from mzrom import lsqr
from mzrom.exceptions import AdjointConsistencyError


def _dense_pair(a):
    return (lambda x: a @ x), (lambda y: a.T @ y)


def test_square_invertible_system():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((12, 12)) + 4.0 * np.eye(12)
    x_true = rng.standard_normal(12)
    apply_f, apply_ft = _dense_pair(a)
    res = lsqr(apply_f, apply_ft, a @ x_true, n=12, max_iter=200, atol=1e-14)
    assert np.max(np.abs(res.x - x_true)) < 1e-9


def test_overdetermined_matches_dense():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((50, 20))
    z = rng.standard_normal((50, 3))
    apply_f, apply_ft = _dense_pair(a)
    res = lsqr(apply_f, apply_ft, z, n=20, max_iter=500, atol=1e-14)
    expect = np.linalg.lstsq(a, z, rcond=None)[0]
    assert np.max(np.abs(res.x - expect)) < 1e-10
    assert res.x.shape == (20, 3)
    assert res.residual_history.shape[1] == 3


def test_matches_scipy_reference():
    from scipy.sparse.linalg import lsqr as scipy_lsqr

    rng = np.random.default_rng(2)
    a = rng.standard_normal((40, 15))
    z = rng.standard_normal(40)
    apply_f, apply_ft = _dense_pair(a)
    mine = lsqr(apply_f, apply_ft, z, n=15, max_iter=300, atol=1e-14)
    ref = scipy_lsqr(a, z, atol=1e-14, btol=1e-14, iter_lim=300)[0]
    assert np.max(np.abs(mine.x - ref)) < 1e-9


def test_inconsistent_adjoint_rejected():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((10, 6))
    b = rng.standard_normal((10, 6))
    with pytest.raises(AdjointConsistencyError):
        lsqr(lambda x: a @ x, lambda y: b.T @ y, np.ones(10), n=6)


def test_zero_rhs_returns_zero():
    a = np.eye(4)
    apply_f, apply_ft = _dense_pair(a)
    res = lsqr(apply_f, apply_ft, np.zeros(4), n=4)
    assert not res.x.any()


def test_iteration_counts_per_column():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((30, 10))
    z = rng.standard_normal((30, 2))
    apply_f, apply_ft = _dense_pair(a)
    res = lsqr(apply_f, apply_ft, z, n=10, max_iter=7, atol=0.0)
    assert np.all(res.iterations == 7)
