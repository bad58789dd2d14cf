"""Fair k-center: farthest-first centers plus a balanced assignment heuristic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import kcenter_optimal_assign
from .core import INF, CenterSet, ColoredDataset, FairClustering, NormSpec, make_clustering
from .fair_reduce import algorithm2
from .solvers import _traverse


@dataclass
class KCenterCenters:
    centers: CenterSet
    order: np.ndarray
    radius_trace: list  # d(c_i, C_{i-1}) for i = 2..k, then the final covering radius


def fair_kcenter_centers(dataset: ColoredDataset, k: int, seed: int = 0, q=2, first=None) -> KCenterCenters:
    """Farthest-first traversal over all colors pooled. O(N k) distance evaluations."""
    size = len(dataset)
    if not 1 <= k <= size:
        raise ValueError(f"k={k} must lie in [1, {size}]")
    start = int(np.random.default_rng(seed).integers(size)) if first is None else int(first)
    allrows = np.arange(size)
    res = _traverse(lambda c: dataset.distances(allrows, [c], q)[:, 0], size, k, start)
    return KCenterCenters(CenterSet.from_indices(dataset, res.centers, k=k), res.centers, res.trace + [res.cost])


def fair_kcenter_assign(dataset: ColoredDataset, centers: CenterSet, q=2, seed: int = 0, delta: float = 0.1, *,
                       fairlets=None) -> FairClustering:
    """Balanced assignment to given centers under the max-distance objective.

    One color: nearest center. Two colors: the optimal balanced assignment via
    matching feasibility and binary search on the radius. Three or more colors
    (where finding the optimum is NP-hard): bottleneck fairlets from ``algorithm2``,
    each fairlet sent whole to the center minimizing its farthest member.
    The achieved radius is the clustering cost. ``fairlets`` (fairlet id per point)
    skips the decomposition when it is already known for this dataset.
    """
    norm = NormSpec(INF, q)
    ell = dataset.num_colors
    if ell == 1:
        d = dataset.distances_to_centers(np.arange(len(dataset)), centers, q)
        return make_clustering(dataset, centers, np.argmin(d, axis=1), norm, heuristic="nearest")
    if ell == 2:
        got = kcenter_optimal_assign(dataset, centers, q)
        return make_clustering(dataset, centers, got.assignment, norm, heuristic="flow")
    if fairlets is None:
        fairlets = kcenter_fairlets(dataset, q, seed=seed, delta=delta)
    fairlets = np.asarray(fairlets)
    d = dataset.distances_to_centers(np.arange(len(dataset)), centers, q)
    assignment = np.empty(len(dataset), dtype=np.int64)
    for f in np.unique(fairlets):
        rows = np.flatnonzero(fairlets == f)
        assignment[rows] = int(np.argmin(d[rows].max(axis=0)))
    return make_clustering(dataset, centers, assignment, norm, heuristic="fairlets")


def kcenter_fairlets(dataset: ColoredDataset, q=2, seed: int = 0, delta: float = 0.1) -> np.ndarray:
    """Fairlet id per point from ``algorithm2`` under bottleneck (p = inf) matchings."""
    return algorithm2(dataset, NormSpec(INF, q), delta=delta, emd_mode="exact", seed=seed).clustering.assignment
