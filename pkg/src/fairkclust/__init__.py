"""Fair (k,p,q)-clustering: matching-based reductions to unconstrained clustering,
fairlet decompositions, fair k-center, exact fair assignment, and exhaustive oracles."""

from .assignment import (TransportInstance, TransportResult, bottleneck_transport, fair_assign_fixed_sizes,
                         kcenter_feasible_assign, kcenter_optimal_assign, min_cost_transport)
from .core import (INF, CenterSet, ColoredDataset, FairClustering, NormSpec, cascaded_norm, clustering_cost,
                   make_clustering, point_distance, verify_balance)
from .errors import (DataError, DimensionMismatchError, FairClusteringError, InfeasibleInstanceError,
                     InstanceTooLargeError, InvalidMetricError, MissingMatchingError, SolverError,
                     UnbalancedDatasetError)
from .fair_center import fair_kcenter_assign, fair_kcenter_centers
from .fair_reduce import (ReductionResult, algorithm1, algorithm2, assign_via_matchings, cluster_fairlets,
                          variant_excellent, variant_q)
from .matching import EMDTable, Matching, emd, greedy_matching, min_cost_perfect_matching, pairwise_emd_table
from .solvers import (SolverConfig, farthest_first, kmedoids_refine, kpp_seed, lloyd_kmeans,
                      local_search_kmedian)

__version__ = "0.1.0"
