"""Perturbation bound for full-rank least squares.

For min ||Z - F X|| with full-column-rank F and residual O = Z - F X, a
perturbed problem (F + dF, Z + dZ) with ||dF||_2 < sigma_min(F) satisfies

    ||Xh - X||_F / ||X||_F
      <= kappa / (1 - kappa ||dF|| / ||F||)
         * ( ||dZ||_F / (||F|| ||X||_F) + ||dF|| / ||F||
             + ||O||_F / (||F|| ||X||_F) ).

The suite checks the inequality over randomized instances.
"""

import numpy as np


def _random_instance(rng):
    m = rng.integers(8, 40)
    n = rng.integers(2, min(m - 1, 12) + 1)
    p = rng.integers(1, 4)
    f = rng.standard_normal((m, n))
    x = rng.standard_normal((n, p))
    # residual orthogonal to range(F), so X is the exact minimizer
    o = rng.standard_normal((m, p))
    o -= f @ np.linalg.lstsq(f, o, rcond=None)[0]
    z = f @ x + o
    sigma_min = np.linalg.svd(f, compute_uv=False)[-1]
    df = rng.standard_normal((m, n))
    df *= rng.uniform(0.05, 0.9) * sigma_min / np.linalg.norm(df, 2)
    dz = rng.standard_normal((m, p)) * rng.uniform(0.0, 0.5)
    return f, x, o, z, df, dz


def test_bound_holds_on_randomized_instances():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(120):
        f, x, o, z, df, dz = _random_instance(rng)
        xh = np.linalg.lstsq(f + df, z + dz, rcond=None)[0]
        norm_f = np.linalg.norm(f, 2)
        norm_df = np.linalg.norm(df, 2)
        kappa = norm_f / np.linalg.svd(f, compute_uv=False)[-1]
        lhs = np.linalg.norm(xh - x) / np.linalg.norm(x)
        denom = 1.0 - kappa * norm_df / norm_f
        assert denom > 0
        rhs = (kappa / denom) * (
            np.linalg.norm(dz) / (norm_f * np.linalg.norm(x))
            + norm_df / norm_f
            + np.linalg.norm(o) / (norm_f * np.linalg.norm(x))
        )
        assert lhs <= rhs * (1 + 1e-12), f"bound violated: {lhs} > {rhs}"
        checked += 1
    assert checked >= 100


def test_bound_tight_for_unperturbed_consistent_problem():
    rng = np.random.default_rng(0)
    f = rng.standard_normal((20, 5))
    x = rng.standard_normal((5, 2))
    xh = np.linalg.lstsq(f, f @ x, rcond=None)[0]
    assert np.linalg.norm(xh - x) / np.linalg.norm(x) < 1e-12
