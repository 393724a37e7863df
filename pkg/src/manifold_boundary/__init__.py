"""Boundary detection for manifold-supported point samples.

Given an i.i.d. sample from an unknown d'-dimensional manifold embedded in
R^d, decide whether the manifold's boundary is empty: compute a per-point
statistic from locally projected neighbour means, take its maximum, and
compare against an explicit chi-square tail threshold.  Includes automatic
neighbour-count selection, per-point boundary flagging, seeded synthetic
generators, and a Monte Carlo level/power harness.
"""

from .boundary_stat import (
    NeighborhoodSummary,
    StatisticResult,
    compute_statistic,
    empirical_cdf,
    neighborhood_summary,
    statistic_from_neighbors,
)
from .chisq import (
    TAIL_BOUND_CONST,
    alpha_const,
    chisq_cdf,
    chisq_log_sf,
    chisq_sf,
    chisq_sf_inv,
    level_bound_G,
)
from .errors import (
    BoundaryDetectError,
    DegenerateSampleError,
    InsufficientInteriorPointsError,
    InvalidConfigurationError,
    InvalidInputError,
    SelectionFailedError,
)
from .experiment import ExperimentPlan, run_cell, run_experiments
from .knn import (
    NeighborIndex,
    NeighborList,
    PointCloud,
    brute_force_k_nearest,
    build_index,
    k_nearest,
    k_nearest_all,
)
from .kselect import KCandidate, KSelectionTrace, d_chi2, default_grid, select_k
from .linalg import EigenDecomposition, SymMatrix, project_onto_span, sym_eigen
from .manifolds import (
    GroundTruth,
    KINDS,
    ManifoldSpec,
    boundary_distance,
    derive_seed,
    generate,
    sample_unit_ball,
)
from .testing import (
    ConsistentDecision,
    TestConfig,
    TestOutcome,
    consistent_rule,
    flag_boundary_points,
    max_consistent_mu,
    p_value_bound,
    run_test,
    threshold,
)

__version__ = "0.1.0"
