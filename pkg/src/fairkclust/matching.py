"""Min-cost perfect (p, q)-matchings between color classes and the EMD built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .core import INF, ColoredDataset, Exponent, NormSpec, parse_exponent


@dataclass(frozen=True)
class Matching:
    """``permutation[s] = t`` pairs row s of class i with row t of class j."""

    permutation: np.ndarray
    cost: float
    p: Exponent = 1

    def inverse(self) -> "Matching":
        inv = np.empty_like(self.permutation)
        inv[self.permutation] = np.arange(len(self.permutation))
        return Matching(inv, self.cost, self.p)


def matching_cost(cost: np.ndarray, permutation, p: Exponent) -> float:
    """Recompute the cost of a permutation on an already powered cost matrix."""
    cost = np.asarray(cost, dtype=float)
    picked = cost[np.arange(len(permutation)), np.asarray(permutation)]
    if picked.size == 0:
        return 0.0
    if p is INF:
        return float(picked.max())
    total = math.fsum(picked)
    return total if p == 1 else total ** (1.0 / p)


def cost_matrix(dataset: ColoredDataset, i: int, j: int, norm: NormSpec) -> np.ndarray:
    """Entry (s, t) = d_q(A_i[s], A_j[t]) ** p, or the raw distance when p = inf."""
    d = dataset.distances(dataset.class_indices(i), dataset.class_indices(j), norm.q)
    return norm.power(d)


def min_cost_perfect_matching(cost, p: Exponent = 1) -> Matching:
    """Exact optimal perfect matching.

    Finite p minimizes the sum of the (already powered) entries and reports its
    p-th root. ``p = inf`` minimizes the largest selected entry; among bottleneck
    optimal matchings the one with least total is returned.
    """
    cost = np.asarray(cost, dtype=float)
    p = parse_exponent(p)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    n = cost.shape[0]
    if n == 0:
        return Matching(np.zeros(0, dtype=np.int64), 0.0, p)
    if p is INF:
        threshold = bottleneck_value(cost)
        masked = np.where(cost <= threshold, cost, np.inf)
        rows, cols = linear_sum_assignment(masked)
    else:
        rows, cols = linear_sum_assignment(cost)
    perm = np.empty(n, dtype=np.int64)
    perm[rows] = cols
    if p is not INF and n <= EXACT_POLISH_MAX:
        perm = exact_polish(cost, perm)
    return Matching(perm, matching_cost(cost, perm, p), p)


# Above this size the exact re-check is skipped; the float optimum may then
# differ from the exact one by a few ulps on (near-)tied instances.
EXACT_POLISH_MAX = 32


def exact_polish(cost: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Cancel negative cycles in exact integer arithmetic.

    The float solver can settle on a matching whose exact sum of entries is an
    ulp above another matching's (common with L1 ties). Every entry is a dyadic
    rational, so scaling to a common denominator gives exact Python integers;
    Bellman-Ford on the swap graph (row u takes row v's column) then finds any
    strictly improving cycle.
    """
    n = len(perm)
    ratios = [[float(x).as_integer_ratio() for x in row] for row in cost]
    den = max(d for row in ratios for _, d in row)
    c = [[num * (den // d) for num, d in row] for row in ratios]
    perm = [int(x) for x in perm]
    while True:
        w = [[c[u][perm[v]] - c[u][perm[u]] for v in range(n)] for u in range(n)]
        dist, pred = [0] * n, [-1] * n
        for _ in range(n):
            last = -1
            for v in range(n):  # edge v -> u: u takes v's column
                dv = dist[v]
                for u in range(n):
                    if dv + w[u][v] < dist[u]:
                        dist[u], pred[u], last = dv + w[u][v], v, u
            if last < 0:
                return np.array(perm, dtype=np.int64)
        for _ in range(n):
            last = pred[last]
        cycle, u = [last], pred[last]
        while u != last:
            cycle.append(u)
            u = pred[u]
        # u took pred[u]'s column along the cycle
        new = {u: perm[pred[u]] for u in cycle}
        for u, col in new.items():
            perm[u] = col



def _has_perfect_matching(allowed: np.ndarray) -> bool:
    match = maximum_bipartite_matching(csr_matrix(allowed.astype(np.int8)), perm_type="column")
    return bool(np.all(match >= 0))


def bottleneck_value(cost: np.ndarray) -> float:
    """Smallest t such that entries <= t admit a perfect matching."""
    values = np.unique(cost)
    # any perfect matching uses every row, so t >= max of row minima (same for columns)
    floor = max(cost.min(axis=1).max(), cost.min(axis=0).max())
    values = values[values >= floor]
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_perfect_matching(cost <= values[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(values[lo])


def greedy_matching(cost, p: Exponent = 1) -> Matching:
    """Pair the globally cheapest unmatched row/column until done.

    Ties go to the lowest (row, column) pair. The result upper-bounds the optimum.
    """
    cost = np.asarray(cost, dtype=float)
    p = parse_exponent(p)
    n = cost.shape[0]
    order = np.lexsort((np.tile(np.arange(n), n), np.repeat(np.arange(n), n), cost.ravel()))
    perm = np.full(n, -1, dtype=np.int64)
    row_used = np.zeros(n, dtype=bool)
    col_used = np.zeros(n, dtype=bool)
    matched = 0
    for flat in order:
        r, c = divmod(int(flat), n)
        if row_used[r] or col_used[c]:
            continue
        perm[r] = c
        row_used[r] = col_used[c] = True
        matched += 1
        if matched == n:
            break
    return Matching(perm, matching_cost(cost, perm, p), p)


def _solve(cost: np.ndarray, p: Exponent, method: str) -> Matching:
    if method == "exact":
        return min_cost_perfect_matching(cost, p)
    if method == "greedy":
        return greedy_matching(cost, p)
    raise ValueError(f"unknown matching method {method!r}")


def match_classes(dataset: ColoredDataset, i: int, j: int, norm: NormSpec, method: str = "exact") -> Matching:
    n = dataset.per_color_count
    if i == j:
        return Matching(np.arange(n), 0.0, norm.p)
    return _solve(cost_matrix(dataset, i, j, norm), norm.p, method)


def emd(dataset: ColoredDataset, i: int, j: int, norm: NormSpec, method: str = "exact") -> float:
    """Earth mover's distance between color classes i and j under ``norm``."""
    return match_classes(dataset, i, j, norm, method).cost


@dataclass
class EMDTable:
    values: np.ndarray
    matchings: dict = field(repr=False)
    norm: NormSpec
    method: str = "exact"

    def matching(self, i: int, j: int) -> Matching:
        return self.matchings[(i, j)]

    def aggregated(self) -> np.ndarray:
        """Per base color, the p-norm of its row of EMD values (max for p = inf)."""
        return np.array([self.norm.aggregate(row) for row in self.values])


def pairwise_emd_table(dataset: ColoredDataset, norm: NormSpec, method: str = "exact", colors=None) -> EMDTable:
    """All pairwise EMDs between color classes, keeping the matchings.

    Only i < j is solved; the reverse direction stores the inverse permutation, so
    ``matching(j, i)`` composed with ``matching(i, j)`` is the identity. If
    ``colors`` is given only rows for those base colors are filled in.
    """
    ell = dataset.num_colors
    values = np.zeros((ell, ell))
    matchings = {}
    n = dataset.per_color_count
    wanted = set(range(ell)) if colors is None else set(int(c) for c in colors)
    for i in range(ell):
        matchings[(i, i)] = Matching(np.arange(n), 0.0, norm.p)
        for j in range(i + 1, ell):
            if i not in wanted and j not in wanted:
                values[i, j] = values[j, i] = np.nan
                continue
            m = match_classes(dataset, i, j, norm, method)
            matchings[(i, j)] = m
            matchings[(j, i)] = m.inverse()
            values[i, j] = values[j, i] = m.cost
    return EMDTable(values, matchings, norm, method)
