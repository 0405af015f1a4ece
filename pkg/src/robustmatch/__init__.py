"""Exact solvers for stable matchings robust to one agent leaving the market.

The objective blends the expected sum of squared partner costs with the
expected squared regret against re-optimized baselines, weighted by a
parameter nu in [0, 1].  `solve_robust` minimizes it over stable matchings
(rotation digraph + min-cut closure); `solve_relaxed` minimizes it over all
matchings (linear assignment reduction).  Everything is exact rational
arithmetic.
"""

from .errors import InternalError, ValidationError
from .model import (
    Agent,
    BlockingPair,
    Instance,
    LeaveDistribution,
    Matching,
    PHI,
    is_stable,
    parse_instance,
    random_instance,
    remove_agent,
    serialize_instance,
)
from .objective import (
    BaselineSet,
    ConventionPair,
    ObjectiveParams,
    RETAINED,
    SELF,
    displayed_cost,
    expected_blocking_pairs,
    psi,
    psi_breakdown,
)
from .lattice import (
    Rotation,
    RotationDigraph,
    RotationEnumeration,
    Shortlists,
    build_rotation_digraph,
    eliminate_rotation,
    enumerate_rotations,
    exposed_rotations,
    matching_of_closed_subset,
    propose_da,
)
from .stable_opt import (
    FlowNetwork,
    RobustSolution,
    SINK,
    SOURCE,
    WeightedRotationDigraph,
    build_flow_network,
    compute_baselines,
    extract_optimal_closed_subset,
    max_flow_min_cut,
    min_sumsq_stable,
    rotation_weight,
    solve_robust,
)
from .relaxed_opt import (
    AssignmentCosts,
    build_assignment_costs,
    pair_cost_f,
    solve_assignment,
    solve_relaxed,
    symmetrize,
)

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AssignmentCosts",
    "BaselineSet",
    "BlockingPair",
    "ConventionPair",
    "FlowNetwork",
    "Instance",
    "InternalError",
    "LeaveDistribution",
    "Matching",
    "ObjectiveParams",
    "PHI",
    "RETAINED",
    "RobustSolution",
    "Rotation",
    "RotationDigraph",
    "RotationEnumeration",
    "SELF",
    "SINK",
    "SOURCE",
    "Shortlists",
    "ValidationError",
    "WeightedRotationDigraph",
    "build_assignment_costs",
    "build_flow_network",
    "build_rotation_digraph",
    "compute_baselines",
    "displayed_cost",
    "eliminate_rotation",
    "enumerate_rotations",
    "expected_blocking_pairs",
    "exposed_rotations",
    "extract_optimal_closed_subset",
    "is_stable",
    "matching_of_closed_subset",
    "max_flow_min_cut",
    "min_sumsq_stable",
    "pair_cost_f",
    "parse_instance",
    "propose_da",
    "psi",
    "psi_breakdown",
    "random_instance",
    "remove_agent",
    "rotation_weight",
    "serialize_instance",
    "solve_assignment",
    "solve_relaxed",
    "solve_robust",
    "symmetrize",
]
