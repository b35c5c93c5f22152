"""Cluster LP toolkit for Correlation Clustering on small instances."""

from .errors import CapacityError, ClusterLpError, SolverError, ValidationError
from .exact import solve_exact
from .instance import Clustering, Instance, generate_random, objective_clustering
from .lp import ClusterLpSolution, solve_cluster_lp_exact, solve_pairwise_lp
from .rounding import ALG3, ALG4, INDEPENDENT, RuleSet, best_of, round_cluster_based, round_pivot

__version__ = "0.1.0"

__all__ = [
    "ALG3", "ALG4", "INDEPENDENT", "CapacityError", "ClusterLpError", "ClusterLpSolution",
    "Clustering", "Instance", "RuleSet", "SolverError", "ValidationError", "generate_random",
    "best_of", "objective_clustering", "round_cluster_based", "round_pivot", "solve_cluster_lp_exact",
    "solve_exact", "solve_pairwise_lp",
]
