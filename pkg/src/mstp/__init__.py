"""Bidirectional estimation of multi-step Markov chain transition probabilities."""

from .chain import GraphFormatError, MarkovChain, SourceDistribution, build_chain, read_edge_list
from .diffusion import (
    DiffusionWeights,
    doeblin_stationary,
    exact_hitting_oracle,
    heat_kernel,
    truncated_hitting_time,
    truncated_return_time,
)
from .estimator import (
    EstimateReport,
    EstimatorParams,
    OracleSizeError,
    bidirectional_mstp,
    exact_mstp_oracle,
    forward_push_mstp,
    monte_carlo_mstp,
)
from .forward import ScoreMode
from .reverse import ReverseWorkspace, new_workspace, reverse_push, run_reverse_phase

__all__ = [
    "DiffusionWeights",
    "EstimateReport",
    "EstimatorParams",
    "GraphFormatError",
    "MarkovChain",
    "OracleSizeError",
    "ReverseWorkspace",
    "ScoreMode",
    "SourceDistribution",
    "bidirectional_mstp",
    "build_chain",
    "doeblin_stationary",
    "exact_hitting_oracle",
    "exact_mstp_oracle",
    "forward_push_mstp",
    "heat_kernel",
    "monte_carlo_mstp",
    "new_workspace",
    "read_edge_list",
    "reverse_push",
    "run_reverse_phase",
    "truncated_hitting_time",
    "truncated_return_time",
]
