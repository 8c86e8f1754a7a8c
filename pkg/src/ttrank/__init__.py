"""Tensor-train completion of third-order tensors with rank estimation.

The rank of a completion problem is estimated from the singular-value gaps
of two side matrices formed from the gradient at a fixed-rank solution.
"""
__version__ = "0.1.0"

from .completion import CompletionProblem, SolverConfig, Trace, objective, riemannian_gradient, solve, test_rmse
from .estimators import TTCompletion, TTRankEstimator
from .experiments import ExperimentConfig, generate, preset, run
from .manifold import (
    ConeElement,
    TangentVector,
    decompose_cone,
    project_tangent,
    reduce_cone_factors,
    retract,
    transport,
)
from .rank import (
    EstimatorConfig,
    RankEstimate,
    estimate_tt_rank,
    estimated_rank,
    naive_estimate,
    side_matrices,
    verify_stationary_structure,
)
from .tensor import SampleSet, fold_left, fold_right, left_unfold, right_unfold
from .tt import (
    GaugedTT,
    RankDeficientError,
    TTTensor,
    evaluate_entry,
    evaluate_samples,
    orthogonalize,
    random_tt,
    read_tt,
    truncate,
    tt_rank,
    tt_svd,
    write_tt,
)

__all__ = [
    "CompletionProblem",
    "ConeElement",
    "EstimatorConfig",
    "ExperimentConfig",
    "GaugedTT",
    "RankDeficientError",
    "RankEstimate",
    "SampleSet",
    "SolverConfig",
    "TTCompletion",
    "TTRankEstimator",
    "TTTensor",
    "TangentVector",
    "Trace",
    "decompose_cone",
    "estimate_tt_rank",
    "estimated_rank",
    "evaluate_entry",
    "evaluate_samples",
    "fold_left",
    "fold_right",
    "generate",
    "left_unfold",
    "naive_estimate",
    "objective",
    "orthogonalize",
    "preset",
    "project_tangent",
    "random_tt",
    "read_tt",
    "reduce_cone_factors",
    "retract",
    "riemannian_gradient",
    "right_unfold",
    "run",
    "side_matrices",
    "solve",
    "test_rmse",
    "transport",
    "truncate",
    "tt_rank",
    "tt_svd",
    "verify_stationary_structure",
    "write_tt",
]
