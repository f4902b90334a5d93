"""Stochastic simulation and exact chain analysis of model-centric discovery.

A population of strategy-driven scientists proposes linear models against a
consensus; score comparisons on fresh data decide whether the consensus
moves. The replication-free process is an ergodic Markov chain analyzed
exactly; the process with a replicator is simulated forward in time.
"""

__version__ = "0.1.0"

from .abm import AbmMetrics, Engine, ExperimentRecord, RunSpec, compute_metrics, run
from .chain import (
    ChainSummary,
    TransitionMatrix,
    build_transition_matrix,
    mean_first_passage,
    stationary_distribution,
    stickiness,
    summarize_chain,
)
from .datagen import (
    Dataset,
    GroundTruth,
    gen_coefficients,
    gen_predictors,
    gen_response,
    standardize,
)
from .errors import (
    AnalysisError,
    ConfigurationError,
    DiscoverySimError,
    EstimationError,
    FitError,
    GenerationError,
)
from .harness import (
    ChainConfig,
    RunConfig,
    WinMatrixStore,
    analyze_chain,
    run_factorial,
    spearman,
    summarize,
)
from .modelspace import (
    Complexity,
    ModelSpace,
    ModelSpec,
    bo_moves,
    compare_complexity,
    enumerate_models,
    format_model,
    hierarchical_closure,
    parse_model,
    tess_neighbors,
)
from .selection import (
    CompareOutcome,
    FitScore,
    Statistic,
    WinMatrix,
    compare,
    estimate_win_matrix,
    estimate_win_matrices,
    fit_ols,
    parse_statistic,
    score,
)
from .strategies import (
    Mode,
    Population,
    StrategyKind,
    proposal_distribution,
    sample_proposal,
    sample_strategy,
)

__all__ = [name for name in dir() if not name.startswith("_")]
