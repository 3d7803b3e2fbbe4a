"""Learning history-enriched reduced models of driven linear systems.

Projecting a linear system onto a subset of its coordinates leaves exact
resolved dynamics with three ingredients: an instantaneous (Markovian)
operator, a memory kernel convolved against the resolved history, and a
noise kernel propagating the unresolved initial data and forcing.  This
package reconstructs all three from snapshot data by greedy time-marching
least squares, predicts resolved trajectories with the learned model, and
ships the diagnostics (identifiability ranks, conditioning bounds,
convergence and regularization studies) that characterize when the
reconstruction is well posed.
"""

from .ensemble import SnapshotEnsemble, mask_partial
from .exceptions import (
    AdjointConsistencyError,
    ConfigError,
    IntegrationError,
    InvalidArgumentError,
    MzromError,
    RankDeficiencyError,
    ShapeError,
    SingularFactorError,
    UndefinedMetricError,
)
from .generate import (
    EnsembleGenConfig,
    generate_ensemble,
    integrate_ensemble,
    sample_initial_conditions,
)
from .grids import TimeGrid
from .krylov import lsqr
from .lstsq import DenseLsSolver, LeastSquaresProblem, LsDiagnostics, solve_dense_ls
from .metrics import (
    ConditioningReport,
    ErrorReport,
    conditioning_diagnostics,
    convergence_rates,
    error_K,
    error_Phi,
    error_R,
)
from .operators import SCHEMES, OperatorSequence
from .oracle import (
    PropagatorCache,
    build_propagator,
    exact_operators_time_invariant,
    nonstationary_kernel,
)
from .predict import PredictionInput, history_cost_estimate, predict
from .projection import ProjectionSpec, extract_blocks, merge, reassemble_blocks, split
from .reconstruct import (
    ReconstructionReport,
    demo_nonstationary_illposedness,
    model_residuals,
    solve_KB_greedy,
    solve_R_global,
    solve_R_per_step,
    solve_finite_memory,
    solve_partial_greedy,
    solve_partial_regularized,
)
from .systems import (
    SystemSpec,
    build_rda_system,
    build_wave_system,
    get_system,
    spectral_diff_matrices,
)

__version__ = "0.1.0"
