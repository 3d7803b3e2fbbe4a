"""Shared fixtures: small systems and cached ensembles."""

import numpy as np
import pytest

from mzrom import (
    EnsembleGenConfig,
    ProjectionSpec,
    TimeGrid,
    generate_ensemble,
    get_system,
)
from mzrom.systems import SystemSpec

RDA_RESOLVED = (5, 10, 15, 20, 25)


def make_constant_system(a, label="const", g=None):
    a = np.asarray(a, dtype=float)

    def a_of_t(t, _a=a):
        return _a

    g_of_t = None
    if g is not None:
        g_vec = np.asarray(g, dtype=float)
        g_of_t = lambda t: g_vec  # noqa: E731
    return SystemSpec(n_full=a.shape[0], a_of_t=a_of_t, time_invariant=True,
                      label=label, g_of_t=g_of_t)


@pytest.fixture(scope="session")
def rotation_system():
    return make_constant_system([[0.0, 1.0], [-1.0, 0.0]], label="rotation")


@pytest.fixture(scope="session")
def rotation_proj():
    return ProjectionSpec(2, (0,))


@pytest.fixture(scope="session")
def rda_proj():
    return ProjectionSpec(30, RDA_RESOLVED)


@pytest.fixture(scope="session")
def rda_a_pair(rda_proj):
    """Training and test ensembles for the advection case at N_T = 160."""
    sys_ = get_system("rda:a", 30)
    grid = TimeGrid(5.0, 160)
    train = generate_ensemble(sys_, rda_proj, grid, EnsembleGenConfig(n_traj=35, seed=11))
    test = generate_ensemble(sys_, rda_proj, grid, EnsembleGenConfig(n_traj=15, seed=12))
    return sys_, grid, train, test


@pytest.fixture(scope="session")
def rda_e_pair(rda_proj):
    """Time-varying case ensembles at a coarse grid (fast to build)."""
    sys_ = get_system("rda:e", 30)
    grid = TimeGrid(5.0, 80)
    train = generate_ensemble(sys_, rda_proj, grid, EnsembleGenConfig(n_traj=35, seed=11))
    test = generate_ensemble(sys_, rda_proj, grid, EnsembleGenConfig(n_traj=15, seed=12))
    return sys_, grid, train, test
