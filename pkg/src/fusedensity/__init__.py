"""Fused density estimation on geometric networks.

Total-variation penalized maximum-likelihood density estimation, reduced
to a sparse quadratic program and solved by operator splitting, with
penalty selection, sampling, metrics, and rate-experiment harnesses.
"""

from .assemble import ObservationSet, QpProblem, build_observations, build_qp, lambda_min
from .density import (
    PiecewiseConstantFn,
    common_refinement,
    evaluate,
    hellinger_sq,
    integrate,
    log_tv,
    mean_log_likelihood,
    tv,
)
from .errors import (
    DanglingEndpoint,
    DisconnectedNetwork,
    EmptyObservations,
    FdeError,
    LambdaTooSmall,
    NetworkMismatch,
    NonpositiveLength,
    NonpositiveValue,
    NotADensity,
    PointOffNetwork,
    TooFewObservations,
)
from .network import (
    Edge,
    Embedding,
    GeometricNetwork,
    NetworkPoint,
    dfs_embed,
    embed_function,
    embed_point,
    total_length,
    validate,
)
from .select import SelectionReport, count_dof, cv_select, ic_select, refit_mle
from .simulate import RateReport, rate_experiment, sample
from .solver import (
    CertifyReport,
    FdeSolution,
    SolverSettings,
    certify,
    fit,
    recover_primal,
    solve_dual,
)

__version__ = "0.1.0"
