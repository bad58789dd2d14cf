"""Min-cost transportation for fair assignment with fixed centers and cluster sizes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .core import INF, CenterSet, ColoredDataset, FairClustering, NormSpec, make_clustering
from .errors import InfeasibleInstanceError, InstanceTooLargeError

_SLACK = 1e-12


@dataclass(frozen=True)
class TransportInstance:
    """Unit-supply sources (points of one color) shipped to capacity-exact centers."""

    costs: np.ndarray
    demands: np.ndarray
    supplies: np.ndarray | None = None

    def __post_init__(self):
        costs = np.atleast_2d(np.asarray(self.costs, dtype=float))
        demands = np.asarray(self.demands)
        if not np.all(np.isfinite(costs)):
            raise ValueError("transport costs must be finite")
        if demands.shape != (costs.shape[1],):
            raise ValueError("need one demand per center")
        if np.any(demands < 0) or np.any(demands != np.round(demands)):
            raise InfeasibleInstanceError("demands must be nonnegative integers")
        supplies = np.ones(costs.shape[0], dtype=np.int64) if self.supplies is None else np.asarray(self.supplies)
        if np.any(supplies != 1):
            raise ValueError("only unit supplies are supported")
        if int(demands.sum()) != costs.shape[0]:
            raise InfeasibleInstanceError(f"total demand {int(demands.sum())} != total supply {costs.shape[0]}")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "demands", demands.astype(np.int64))
        object.__setattr__(self, "supplies", supplies.astype(np.int64))


@dataclass
class TransportResult:
    assignment: np.ndarray
    cost: float
    counts: np.ndarray
    augmentations: int = 0


TRANSPORT_METHODS = ("assignment", "ssp")


def min_cost_transport(instance: TransportInstance, method: str = "assignment") -> TransportResult:
    """Exact integral min-cost transport.

    ``"assignment"`` expands center c into ``demands[c]`` unit slots and solves the
    resulting square assignment problem with the Hungarian backend also used for
    matchings. ``"ssp"`` runs successive shortest paths (see ``ssp_transport``).
    Both return an optimal integral assignment.
    """
    if method == "assignment":
        return _slot_transport(instance)
    if method == "ssp":
        return ssp_transport(instance)
    raise ValueError(f"unknown transport method {method!r}; choose from {TRANSPORT_METHODS}")


def _slot_transport(instance: TransportInstance) -> TransportResult:
    c = instance.costs
    n, k = c.shape
    owner = np.repeat(np.arange(k), instance.demands)
    if n == 0:
        return TransportResult(np.zeros(0, dtype=np.int64), 0.0, np.zeros(k, dtype=np.int64))
    rows, slots = linear_sum_assignment(c[:, owner])
    assign = np.empty(n, dtype=np.int64)
    assign[rows] = owner[slots]
    return TransportResult(assign, math.fsum(c[np.arange(n), assign]), np.bincount(assign, minlength=k))


def ssp_transport(instance: TransportInstance) -> TransportResult:
    """Exact integral min-cost transport by successive shortest paths.

    Starts from the pseudo-flow that sends every source to its cheapest center,
    which has no negative residual cycle. Overfull centers then push one unit at a
    time to underfull ones along shortest residual paths. Residual paths alternate
    center -> (reassign one of its points) -> center, so they are searched on the
    k-node graph whose edge (a, b) is the cheapest reassignment of a point from a to b.
    """
    c = instance.costs
    demands = instance.demands
    n, k = c.shape
    rows = np.arange(n)
    assign = np.argmin(c, axis=1)
    excess = np.bincount(assign, minlength=k) - demands
    rel = c - c[rows, assign][:, None]
    edge = np.full((k, k), np.inf)
    mover = np.full((k, k), -1, dtype=np.int64)

    def refresh(a):
        members = np.flatnonzero(assign == a)
        if len(members):
            sub = rel[members]
            pos = np.argmin(sub, axis=0)
            edge[a] = sub[pos, np.arange(k)]
            mover[a] = members[pos]
        else:
            edge[a] = np.inf
            mover[a] = -1
        edge[a, a] = np.inf

    for a in range(k):
        refresh(a)

    steps = 0
    cols = np.arange(k)
    while np.any(excess > 0):
        dist = np.where(excess > 0, 0.0, np.inf)
        pred = np.full(k, -1, dtype=np.int64)
        for _ in range(k):
            cand = dist[:, None] + edge
            src = np.argmin(cand, axis=0)
            best = cand[src, cols]
            better = best < dist - _SLACK
            if not better.any():
                break
            dist[better] = best[better]
            pred[better] = src[better]
        sinks = np.flatnonzero(excess < 0)
        t = int(sinks[np.argmin(dist[sinks])])
        if not np.isfinite(dist[t]):
            raise InfeasibleInstanceError("no augmenting path; demands cannot be met")
        path = [t]
        while pred[path[-1]] != -1:
            path.append(int(pred[path[-1]]))
            if len(path) > k:
                raise RuntimeError("cycle in shortest-path tree")
        path.reverse()
        moves = [(int(mover[a, b]), b) for a, b in zip(path, path[1:])]
        for s, b in moves:
            assign[s] = b
            rel[s] = c[s] - c[s, b]
        excess[path[0]] -= 1
        excess[t] += 1
        for a in path:
            refresh(a)
        steps += 1

    cost = math.fsum(c[rows, assign])
    return TransportResult(assign, cost, np.bincount(assign, minlength=k), steps)


def bottleneck_transport(dist: np.ndarray, demands) -> TransportResult:
    """Meet ``demands`` exactly while minimizing the largest distance used.

    Binary search over distinct distances with 0/1 threshold costs; the final
    solve also minimizes total distance among bottleneck-optimal assignments.
    """
    dist = np.asarray(dist, dtype=float)
    demands = np.asarray(demands, dtype=np.int64)
    TransportInstance(dist, demands)
    usable = dist[:, demands > 0]
    values = np.unique(usable)
    values = values[values >= usable.min(axis=1).max()]
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        res = min_cost_transport(TransportInstance((dist > values[mid]).astype(float), demands))
        if res.cost == 0:
            hi = mid
        else:
            lo = mid + 1
    threshold = values[lo]
    big = (len(dist) + 1) * (float(dist.max()) + 1.0)
    res = min_cost_transport(TransportInstance(np.where(dist <= threshold, dist, big), demands))
    picked = dist[np.arange(len(dist)), res.assignment]
    res.cost = float(picked.max()) if len(picked) else 0.0
    return res


def _color_costs(dataset: ColoredDataset, color: int, centers: CenterSet, norm: NormSpec) -> np.ndarray:
    return dataset.distances_to_centers(dataset.class_indices(color), centers, norm.q)


def fair_assign_fixed_sizes(dataset: ColoredDataset, centers: CenterSet, sizes, norm: NormSpec, colors=None,
                            fixed=None) -> FairClustering:
    """Send every color class to ``centers`` with exactly ``sizes[c]`` points at center c.

    One transport per color with d**p costs (bottleneck transport when p = inf).
    ``fixed`` maps a color to an already chosen per-class assignment, which is kept.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.shape != (len(centers),):
        raise InfeasibleInstanceError("need one size per center")
    if int(sizes.sum()) != dataset.per_color_count or np.any(sizes < 0):
        raise InfeasibleInstanceError(f"sizes must be nonnegative and sum to n={dataset.per_color_count}")
    fixed = fixed or {}
    assignment = np.empty(len(dataset), dtype=np.int64)
    for color in range(dataset.num_colors) if colors is None else colors:
        rows = dataset.class_indices(color)
        if color in fixed:
            assignment[rows] = fixed[color]
            continue
        d = _color_costs(dataset, color, centers, norm)
        if norm.p is INF:
            res = bottleneck_transport(d, sizes)
        else:
            res = min_cost_transport(TransportInstance(norm.power(d), sizes))
        assignment[rows] = res.assignment
    return make_clustering(dataset, centers, assignment, norm, sizes=sizes.tolist())


def _two_color_feasible(dataset, centers, radius, q):
    red, blue = dataset.class_indices(0), dataset.class_indices(1)
    near_r = dataset.distances_to_centers(red, centers, q) <= radius
    near_b = dataset.distances_to_centers(blue, centers, q) <= radius
    common = near_r.astype(np.int64) @ near_b.T.astype(np.int64)
    match = maximum_bipartite_matching(csr_matrix((common > 0).astype(np.int8)), perm_type="column")
    if np.any(match < 0):
        return None
    assignment = np.empty(len(dataset), dtype=np.int64)
    for s, t in enumerate(match):
        c = int(np.argmax(near_r[s] & near_b[t]))
        assignment[red[s]] = c
        assignment[blue[t]] = c
    return assignment


def _size_vectors(n: int, k: int):
    if k == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _size_vectors(n - first, k - 1):
            yield (first,) + rest


def kcenter_feasible_assign(dataset: ColoredDataset, centers: CenterSet, radius: float, q=2, max_size_vectors=20000):
    """Balanced assignment with every point within ``radius`` of its center, or None.

    One color: nearest center. Two colors: a red point and a blue point can share a
    center iff some center is within radius of both, so a perfect bipartite matching
    on that graph is exactly a balanced assignment. Three or more colors: shared size
    vectors are enumerated and each color is checked with a threshold transport.
    """
    norm = NormSpec(INF, q)
    ell = dataset.num_colors
    if radius < 0:
        return None
    if ell == 1:
        d = dataset.distances_to_centers(np.arange(len(dataset)), centers, q)
        if np.any(d.min(axis=1) > radius):
            return None
        return make_clustering(dataset, centers, np.argmin(d, axis=1), norm)
    if ell == 2:
        assignment = _two_color_feasible(dataset, centers, radius, q)
        return None if assignment is None else make_clustering(dataset, centers, assignment, norm)

    n, kc = dataset.per_color_count, len(centers)
    if math.comb(n + kc - 1, kc - 1) > max_size_vectors:
        raise InstanceTooLargeError("too many size vectors for exhaustive k-center feasibility")
    masks = [(_color_costs(dataset, color, centers, norm) > radius).astype(float) for color in range(ell)]
    for sizes in _size_vectors(n, kc):
        sizes = np.array(sizes, dtype=np.int64)
        if any(np.all(m[:, sizes > 0] > 0, axis=1).any() for m in masks):
            continue
        parts = []
        for m in masks:
            res = min_cost_transport(TransportInstance(m, sizes))
            if res.cost > 0:
                break
            parts.append(res.assignment)
        else:
            assignment = np.empty(len(dataset), dtype=np.int64)
            for color, part in enumerate(parts):
                assignment[dataset.class_indices(color)] = part
            return make_clustering(dataset, centers, assignment, norm, sizes=sizes.tolist())
    return None


def kcenter_optimal_assign(dataset: ColoredDataset, centers: CenterSet, q=2) -> FairClustering:
    """Smallest-radius balanced assignment to fixed centers, by binary search on the radius."""
    d = dataset.distances_to_centers(np.arange(len(dataset)), centers, q)
    values = np.unique(d)
    values = values[values >= d.min(axis=1).max()]
    lo, hi = 0, len(values) - 1
    best = kcenter_feasible_assign(dataset, centers, float(values[hi]), q)
    if best is None:
        raise InfeasibleInstanceError("no balanced assignment exists even at the largest radius")
    while lo < hi:
        mid = (lo + hi) // 2
        got = kcenter_feasible_assign(dataset, centers, float(values[mid]), q)
        if got is None:
            lo = mid + 1
        else:
            hi, best = mid, got
    return best
