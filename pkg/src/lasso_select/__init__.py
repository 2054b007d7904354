"""Consistent variable selection via weighted l1-penalized least squares.

The package solves the data-weighted lasso with an optimality certificate,
computes the population target of selection (the sparsest linear
approximation within an L2 ball) by exhaustive search, audits the
assumptions the consistency theory needs, evaluates its explicit tail
bounds, and runs seeded Monte Carlo experiments that certify selection
consistency empirically.
"""

__version__ = "0.1.0"

from .errors import (
    LassoSelectError,
    DomainError,
    ConfigError,
    ParseError,
    UnsupportedMeasure,
    DegenerateColumn,
    ConvergenceError,
    SingularSubset,
    EmptyLambda,
    ExhaustiveLimit,
    DegenerateGram,
    GammaCapExceeded,
    ExperimentError,
)
from .dictionary import (
    Box,
    coordinate,
    polynomial,
    PrecomputedColumn,
    LinearCombination,
    Dictionary,
    DiscreteMeasure,
    SuppliedMoments,
    CustomMeasure,
    UniformNoise,
    TruncatedGaussianNoise,
    LaplaceNoise,
    Scenario,
    Sample,
    Moments,
    CsvLayout,
    evaluate_design,
    empirical_norms,
    sample_scenario,
    load_dataset,
    population_moments,
)
from .solver import (
    PenaltySpec,
    SolverOptions,
    KktReport,
    LassoSolution,
    EventB,
    compute_penalty,
    rescale_problem,
    penalized_objective,
    solve_weighted_lasso,
    support,
    kkt_check,
    solve_restricted,
    event_b,
)
from .oracle import (
    TargetSpec,
    SubsetFit,
    MinSignalCheck,
    approximation_error,
    best_subset_fit,
    target_set,
    check_min_signal,
)
from .diagnostics import (
    DEFAULT_COHERENCE_CONST,
    CoherenceReport,
    TuningConfig,
    BoundParams,
    BoundednessReport,
    EstimationTails,
    EventTails,
    BoundRow,
    correlations,
    check_coherence,
    check_boundedness,
    in_coherent_ball,
    tuning_sequence,
    bernstein_tail,
    l1_tail_bound,
    estimation_tail_bounds,
    event_tail_bounds,
    bound_table,
)
from .harness import (
    ExperimentConfig,
    ReplicateResult,
    SizeAggregate,
    ExperimentResult,
    wilson_interval,
    run_replicate,
    run_experiment,
    consistency_curve,
    aggregate_csv,
    persist_results,
    load_results,
)
