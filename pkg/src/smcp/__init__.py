"""Stochastic matching with commitment: probing algorithms, order sampler and exact oracles."""

from .algorithms import (
    GreedyMatcher,
    ObliviousBipartite,
    RandomVertexGreedy,
    RunRecord,
    TwoStageConfig,
    TwoStageMatcher,
    run_greedy,
    run_oblivious_bipartite,
    run_random_vertex_greedy,
    run_stage_two,
    run_two_stage,
)
from .dp import hardness_ratio, k4_closed_forms, optimal_online_value
from .estimate import QEstimate, QEstimator, default_sample_count, estimate_q, recompute_schedule
from .graph import (
    Matching,
    ProbeError,
    ProbeOracle,
    ProbGraph,
    RealizedGraph,
    candidate_state,
    generate_instance,
    load_instance,
    sample_realization,
    save_instance,
)
from .matching import (
    approx_max_matching,
    brute_force_max_matching,
    exact_q_table,
    expected_opt,
    max_matching,
)
from .sampler import (
    OrderPolicy,
    TargetProfile,
    build_policy,
    delta_scaled_targets,
    feasibility_margin,
    first_occurrence_probs,
    sample_order,
)

__version__ = "0.1.0"
