"""Unconstrained (k, p, q)-clustering solvers used as the black box of the reductions.

Medoid solvers work on a square matrix of ground distances and return centers as
row indices into it. ``lloyd_kmeans`` is the only solver with free centroids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import INF, ColoredDataset, CenterSet, NormSpec, pairwise_distances, parse_exponent
from .errors import SolverError

ALGORITHMS = ("local_search_kmedian", "kpp_seed_medoids", "farthest_first", "lloyd_kmeans", "exact")

# worst-case approximation factor carried as metadata; None where no constant bound applies
_ALPHA = {
    "local_search_kmedian": 5.0,
    "kpp_seed_medoids": None,
    "farthest_first": 2.0,
    "lloyd_kmeans": None,
    "exact": 1.0,
}


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "local_search_kmedian"
    seed: int = 0
    max_iterations: int | None = None
    improvement_threshold: float = 1e-4
    # "class": centers drawn from the clustered color class; "all": from every input point
    center_pool: str = "class"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown solver {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.improvement_threshold < 1:
            raise ValueError("improvement_threshold must lie in (0, 1)")
        if self.center_pool not in ("class", "all"):
            raise ValueError("center_pool must be 'class' or 'all'")

    @property
    def alpha(self):
        return _ALPHA[self.algorithm]


@dataclass
class SolverResult:
    centers: np.ndarray | None  # indices into the solver's point set
    cost: float
    coords: np.ndarray | None = None
    trace: list = field(default_factory=list)
    iterations: int = 0


def _as_distances(points, q, precomputed: bool) -> np.ndarray:
    if precomputed:
        d = np.asarray(points, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("precomputed distances must be a square matrix")
        return d
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return pairwise_distances(x, x, q)


def _weight_matrix(d: np.ndarray, norm: NormSpec) -> np.ndarray:
    if norm.p is INF:
        raise SolverError("medoid sum objectives need a finite p; use farthest_first for p = inf")
    return norm.power(d)


def distinct_count(d: np.ndarray) -> int:
    """Number of distinct points, read off a distance matrix (zero distance = same point)."""
    zero = d <= 0
    dup = np.tril(zero, -1).any(axis=1)
    return int((~dup).sum())


def _finish(norm: NormSpec, powered: float) -> float:
    return norm.finish(max(powered, 0.0))


def kpp_seed(points, k: int, norm: NormSpec, seed: int, *, precomputed=False, first=None, weight_power=None) -> np.ndarray:
    """D^w sampling: first center uniform, then each next one with probability proportional
    to (distance to the chosen set) ** w. w defaults to p (1 for k-median, 2 for k-means)."""
    d = _as_distances(points, norm.q, precomputed)
    size = d.shape[0]
    if not 1 <= k <= size:
        raise SolverError(f"k={k} must lie in [1, {size}]")
    if weight_power is None:
        weight_power = 1 if norm.p is INF else norm.p
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(size)) if first is None else int(first)]
    nearest = d[:, chosen[0]].copy()
    while len(chosen) < k:
        w = nearest ** weight_power
        w[chosen] = 0.0
        total = w.sum()
        if total > 0:
            nxt = int(rng.choice(size, p=w / total))
        else:
            free = np.setdiff1d(np.arange(size), chosen)
            nxt = int(rng.choice(free))
        chosen.append(nxt)
        np.minimum(nearest, d[:, nxt], out=nearest)
    return np.array(chosen, dtype=np.int64)


def _nearest_two(w: np.ndarray, centers: np.ndarray):
    sub = w[:, centers]
    if len(centers) == 1:
        d1 = sub[:, 0]
        return np.zeros(len(w), dtype=np.int64), d1, np.full(len(w), np.inf)
    order = np.argsort(sub, axis=1, kind="stable")
    rows = np.arange(len(w))
    return order[:, 0], sub[rows, order[:, 0]], sub[rows, order[:, 1]]


def swap_costs(w: np.ndarray, centers: np.ndarray, weights=None) -> np.ndarray:
    """Powered cost after replacing centers[m] by candidate c, as a k x N array.

    Current centers as candidates are set to inf.
    """
    size = w.shape[0]
    k = len(centers)
    wt = np.ones(size) if weights is None else np.asarray(weights, dtype=float)
    slot, d1, d2 = _nearest_two(w, centers)
    keep = np.minimum(w, d1[:, None])  # point x when c is added and its own center stays
    base = wt @ keep
    lose = np.minimum(w, d2[:, None]) - keep  # extra when x's own center is removed
    onehot = np.zeros((k, size))
    onehot[slot, np.arange(size)] = wt
    out = base[None, :] + onehot @ lose
    out[:, centers] = np.inf
    return out


def local_search_kmedian(points, k: int, norm: NormSpec, config: SolverConfig | None = None, *,
                         precomputed=False, weights=None, init=None) -> SolverResult:
    """Single-swap local search over medoids.

    A swap is taken only when it lowers the (powered) cost by at least a relative
    ``improvement_threshold``; the steepest such swap is applied each round.
    Stops after ``max_iterations`` swaps (default 100 k).
    """
    config = config or SolverConfig()
    d = _as_distances(points, norm.q, precomputed)
    w = _weight_matrix(d, norm)
    size = d.shape[0]
    if k < 1:
        raise SolverError("k must be positive")
    if k > distinct_count(d):
        raise SolverError(f"k={k} exceeds the number of distinct points ({distinct_count(d)})")
    wt = np.ones(size) if weights is None else np.asarray(weights, dtype=float)
    centers = kpp_seed(d, k, norm, config.seed, precomputed=True) if init is None else np.array(init, dtype=np.int64)
    cap = config.max_iterations or 100 * k
    cost = float(wt @ w[:, centers].min(axis=1))
    trace = [cost]
    it = 0
    while it < cap and k < size:
        cand = swap_costs(w, centers, wt)
        m, c = np.unravel_index(int(np.argmin(cand)), cand.shape)
        new = float(cand[m, c])
        if not new < cost * (1.0 - config.improvement_threshold):
            break
        centers = centers.copy()
        centers[m] = c
        cost = float(wt @ w[:, centers].min(axis=1))
        trace.append(cost)
        it += 1
    return SolverResult(centers, _finish(norm, cost), trace=[_finish(norm, t) for t in trace], iterations=it)


def is_swap_stable(points, centers, norm: NormSpec, threshold=1e-4, *, precomputed=False, weights=None) -> bool:
    """True when no single swap improves the cost by a relative factor >= threshold."""
    d = _as_distances(points, norm.q, precomputed)
    w = _weight_matrix(d, norm)
    centers = np.asarray(centers, dtype=np.int64)
    wt = np.ones(len(w)) if weights is None else np.asarray(weights, dtype=float)
    cost = float(wt @ w[:, centers].min(axis=1))
    if len(centers) == len(w):
        return True
    # brute force, independent of swap_costs
    best = np.inf
    for m in range(len(centers)):
        for c in np.setdiff1d(np.arange(len(w)), centers):
            trial = centers.copy()
            trial[m] = c
            best = min(best, float(wt @ w[:, trial].min(axis=1)))
    return not best < cost * (1.0 - threshold)


def _reseed_empty(w, centers, slot, d1):
    """Move each empty cluster's center to the currently farthest non-center point."""
    counts = np.bincount(slot, minlength=len(centers))
    for m in np.flatnonzero(counts == 0):
        far = d1.copy()
        far[centers] = -np.inf
        x = int(np.argmax(far))
        if far[x] <= 0:
            break
        centers[m] = x
        sub = w[:, centers]
        slot = np.argmin(sub, axis=1)
        d1 = sub[np.arange(len(w)), slot]
    return centers, slot, d1


def kmedoids_refine(points, centers, norm: NormSpec, config: SolverConfig | None = None, *,
                    precomputed=False, weights=None) -> SolverResult:
    """Alternate nearest-medoid assignment and per-cluster medoid updates.

    The current medoid always stays a candidate for its cluster, so the cost never
    increases. Empty clusters get their center moved to the farthest point.
    """
    config = config or SolverConfig()
    d = _as_distances(points, norm.q, precomputed)
    w = _weight_matrix(d, norm)
    wt = np.ones(len(w)) if weights is None else np.asarray(weights, dtype=float)
    centers = np.array(centers, dtype=np.int64)
    cap = config.max_iterations or 100
    sub = w[:, centers]
    slot = np.argmin(sub, axis=1)
    d1 = sub[np.arange(len(w)), slot]
    cost = float(wt @ d1)
    trace = [cost]
    it = 0
    while it < cap:
        centers, slot, d1 = _reseed_empty(w, centers, slot, d1)
        new_centers = centers.copy()
        for m in range(len(centers)):
            members = np.flatnonzero(slot == m)
            if len(members) == 0:
                continue
            pool = np.union1d(members, centers[m:m + 1])
            pool = pool[~np.isin(pool, np.delete(new_centers, m))]
            totals = wt[members] @ w[np.ix_(members, pool)]
            best = pool[int(np.argmin(totals))]
            cur = float(wt[members] @ w[members, centers[m]])
            if totals.min() < cur:
                new_centers[m] = best
        sub = w[:, new_centers]
        new_slot = np.argmin(sub, axis=1)
        new_d1 = sub[np.arange(len(w)), new_slot]
        new_cost = float(wt @ new_d1)
        it += 1
        if new_cost > cost:
            break
        improved = cost - new_cost
        centers, slot, d1 = new_centers, new_slot, new_d1
        trace.append(new_cost)
        if improved <= config.improvement_threshold * cost or improved == 0:
            cost = new_cost
            break
        cost = new_cost
    return SolverResult(centers, _finish(norm, cost), trace=[_finish(norm, t) for t in trace], iterations=it)


def farthest_first(points, k: int, seed: int = 0, q=2, *, precomputed=False, first=None) -> SolverResult:
    """Gonzalez traversal. ``trace[i]`` is the distance of the (i+2)-th center to the ones
    before it; ``cost`` is the final covering radius."""
    d = _as_distances(points, parse_exponent(q), precomputed)
    size = d.shape[0]
    if not 1 <= k <= size:
        raise SolverError(f"k={k} must lie in [1, {size}]")
    start = int(np.random.default_rng(seed).integers(size)) if first is None else int(first)
    return _traverse(lambda c: d[:, c], size, k, start)


def _traverse(column, size: int, k: int, start: int) -> SolverResult:
    chosen = [start]
    nearest = np.array(column(start), dtype=float)
    trace = []
    while len(chosen) < k:
        cand = nearest.copy()
        cand[chosen] = -np.inf
        nxt = int(np.argmax(cand))
        trace.append(float(nearest[nxt]))
        chosen.append(nxt)
        np.minimum(nearest, column(nxt), out=nearest)
    return SolverResult(np.array(chosen, dtype=np.int64), float(nearest.max()), trace=trace, iterations=k)


def lloyd_kmeans(points, k: int, config: SolverConfig | None = None) -> SolverResult:
    """Lloyd iterations on squared Euclidean distance, seeded with k-means++.

    ``cost`` is the sum of squared distances; ``coords`` holds the centroids.
    """
    config = config or SolverConfig(algorithm="lloyd_kmeans")
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    size = x.shape[0]
    if not 1 <= k <= size:
        raise SolverError(f"k={k} must lie in [1, {size}]")
    init = kpp_seed(x, k, NormSpec(2, 2), config.seed)
    cent = x[init].copy()
    cap = config.max_iterations or 300
    trace = []
    prev = math.inf
    for _ in range(cap):
        sq = pairwise_distances(x, cent, 2) ** 2
        slot = np.argmin(sq, axis=1)
        cost = float(sq[np.arange(size), slot].sum())
        trace.append(cost)
        if math.isfinite(prev) and prev - cost <= config.improvement_threshold * prev:
            break
        prev = cost
        d1 = sq[np.arange(size), slot]
        for m in range(k):
            members = slot == m
            if members.any():
                cent[m] = x[members].mean(axis=0)
            else:
                far = int(np.argmax(d1))
                cent[m] = x[far]
                d1[far] = 0.0
    sq = pairwise_distances(x, cent, 2) ** 2
    cost = float(sq.min(axis=1).sum())
    if cost < trace[-1]:
        trace.append(cost)
    return SolverResult(None, cost, coords=cent, trace=trace, iterations=len(trace))


def run_solver(dataset: ColoredDataset, members, k: int, norm: NormSpec, config: SolverConfig, seed: int | None = None,
               weights=None):
    """Cluster the dataset rows ``members`` without fairness constraints.

    Returns (CenterSet, SolverResult). ``k`` is clipped to the number of distinct
    points available, since more centers cannot lower the cost.
    """
    from .oracle import brute_unconstrained_opt

    members = np.asarray(members, dtype=np.int64)
    seed = config.seed if seed is None else seed
    cfg = SolverConfig(config.algorithm, seed, config.max_iterations, config.improvement_threshold, config.center_pool)
    algo = cfg.algorithm
    if algo == "lloyd_kmeans":
        if dataset.metric_mode:
            raise SolverError("lloyd_kmeans needs coordinates, not a distance matrix")
        res = lloyd_kmeans(dataset.points[members], min(k, len(members)), cfg)
        return CenterSet(coords=res.coords, k=k), res

    if algo == "exact":
        pool = np.arange(len(dataset)) if cfg.center_pool == "all" else members
        d = dataset.distances(members, pool, norm.q)
        res = brute_unconstrained_opt(d, min(k, len(pool)), norm, precomputed=True)
        return CenterSet.from_indices(dataset, pool[res.centers], k=k), res

    d = dataset.distances(members, members, norm.q)
    kk = min(k, distinct_count(d))
    if norm.p is INF and algo in ("local_search_kmedian", "kpp_seed_medoids"):
        algo = "farthest_first"  # no sum objective to descend on; use the k-center solver
    if algo == "farthest_first":
        res = farthest_first(d, kk, seed, precomputed=True)
        if norm.p is not INF:
            res.cost = norm.aggregate(d[:, res.centers].min(axis=1))
    elif algo == "local_search_kmedian":
        res = local_search_kmedian(d, kk, norm, cfg, precomputed=True, weights=weights)
    else:
        init = kpp_seed(d, kk, norm, seed, precomputed=True)
        res = kmedoids_refine(d, init, norm, cfg, precomputed=True, weights=weights)
    return CenterSet.from_indices(dataset, members[res.centers], k=k), res
