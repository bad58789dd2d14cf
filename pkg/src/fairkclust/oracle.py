"""Exhaustive ground-truth solvers for tiny instances.

Everything here is deliberately independent of the fast code paths: no Hungarian
solver, no flows, no local search. They exist to certify those paths in tests.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import INF, CenterSet, ColoredDataset, FairClustering, NormSpec, make_clustering, parse_exponent
from .errors import InstanceTooLargeError
from .matching import Matching
from .solvers import SolverResult, _as_distances

MAX_MATCHING_N = 8
MAX_POINTS = 12
MAX_ENUMERATION = 500_000


def _digits(count: int, base: int, width: int) -> np.ndarray:
    """All base-``base`` words of length ``width`` as rows, first position fastest."""
    codes = np.arange(count, dtype=np.int64)
    return (codes[:, None] // (base ** np.arange(width, dtype=np.int64))[None, :]) % base


def brute_matching(cost, p=1) -> Matching:
    """Best permutation by enumerating all n! of them."""
    cost = np.asarray(cost, dtype=float)
    p = parse_exponent(p)
    n = cost.shape[0]
    if n > MAX_MATCHING_N:
        raise InstanceTooLargeError(f"brute_matching supports n <= {MAX_MATCHING_N}, got {n}")
    if n == 0:
        return Matching(np.zeros(0, dtype=np.int64), 0.0, p)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    picked = cost[np.arange(n)[None, :], perms]
    values = picked.max(axis=1) if p is INF else picked.sum(axis=1)
    best = int(np.argmin(values))
    perm = perms[best]
    if p is INF:
        total = float(values[best])
    else:
        total = math.fsum(picked[best])
        total = total if p == 1 else total ** (1.0 / p)
    return Matching(perm, total, p)


def brute_unconstrained_opt(points, k: int, norm: NormSpec, *, precomputed=False, candidates=None) -> SolverResult:
    """Best k centers among the candidate points, every point to its nearest one.

    With ``precomputed=True`` ``points`` may be a rectangular N x M distance matrix
    from the N points to M candidate centers. ``candidates`` (coordinates) does the
    same for coordinate input.
    """
    if precomputed:
        d = np.asarray(points, dtype=float)
    elif candidates is not None:
        from .core import pairwise_distances

        d = pairwise_distances(points, candidates, norm.q)
    else:
        d = _as_distances(points, norm.q, False)
    n, m = d.shape
    kk = min(k, m)
    if n > 64 or math.comb(m, kk) > MAX_ENUMERATION:
        raise InstanceTooLargeError(f"brute_unconstrained_opt: N={n}, {m} candidates, k={k} is too large")
    w = d if norm.p is INF else norm.power(d)
    best_val, best = math.inf, None
    for combo in itertools.combinations(range(m), kk):
        near = w[:, combo].min(axis=1)
        val = float(near.max()) if norm.p is INF else math.fsum(near)
        if val < best_val:
            best_val, best = val, combo
    return SolverResult(np.array(best, dtype=np.int64), norm.finish(best_val) if norm.p is not INF else best_val)


def _balanced_masks(colors: np.ndarray, ell: int):
    size = len(colors)
    masks = np.arange(1, 1 << size, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(size)) & 1).astype(np.int64)
    onehot = np.zeros((size, ell), dtype=np.int64)
    onehot[np.arange(size), colors] = 1
    counts = bits @ onehot
    keep = np.all(counts == counts[:, :1], axis=1)
    return masks[keep], bits[keep].astype(bool)


def brute_fair_opt(dataset: ColoredDataset, k: int, norm: NormSpec, centers: str = "medoid") -> FairClustering:
    """Globally optimal fair clustering with at most k clusters.

    Dynamic program over balanced subsets: a balanced set splits only into balanced
    parts, so every state is a balanced bitmask. ``centers="medoid"`` restricts each
    cluster center to an input point (any color); ``"centroid"`` uses the exact mean
    and needs p = q = 2.
    """
    size = len(dataset)
    if size > MAX_POINTS:
        raise InstanceTooLargeError(f"brute_fair_opt supports at most {MAX_POINTS} points, got {size}")
    if k < 1:
        raise ValueError("k must be positive")
    masks, bits = _balanced_masks(dataset.colors, dataset.num_colors)
    allpts = np.arange(size)

    if centers == "medoid":
        d = dataset.distances(allpts, allpts, norm.q)
        if norm.p is INF:
            per = np.where(bits[:, :, None], d[None, :, :], -np.inf).max(axis=1)
        else:
            per = bits.astype(float) @ norm.power(d)
        choice = np.argmin(per, axis=1)
        cluster_cost = per[np.arange(len(masks)), choice]
    elif centers == "centroid":
        if dataset.metric_mode or norm.p != 2 or norm.q != 2:
            raise ValueError("centroid centers need coordinates and p = q = 2")
        x = dataset.points
        cluster_cost = np.empty(len(masks))
        means = np.empty((len(masks), x.shape[1]))
        for t, row in enumerate(bits):
            sub = x[row]
            means[t] = sub.mean(axis=0)
            cluster_cost[t] = float(((sub - means[t]) ** 2).sum())
    else:
        raise ValueError("centers must be 'medoid' or 'centroid'")

    full = (1 << size) - 1
    cc = np.full(1 << size, np.inf)
    cc[masks] = cluster_cost
    position = np.full(1 << size, -1, dtype=np.int64)
    position[masks] = np.arange(len(masks))
    subsets = {}
    for mask in masks.tolist():
        low = mask & -mask
        subsets[mask] = masks[((masks & ~mask) == 0) & ((masks & low) != 0)]

    prev = np.full(1 << size, np.inf)
    prev[0] = 0.0
    picks = []
    for _ in range(min(k, dataset.per_color_count)):
        cur = np.full(1 << size, np.inf)
        cur[0] = 0.0
        pick = {}
        for mask in masks.tolist():
            cand = subsets[mask]
            rest = prev[mask ^ cand]
            vals = np.maximum(cc[cand], rest) if norm.p is INF else cc[cand] + rest
            t = int(np.argmin(vals))
            cur[mask] = vals[t]
            pick[mask] = int(cand[t])
        picks.append(pick)
        prev = cur

    groups = []
    mask, level = full, len(picks) - 1
    while mask:
        s = picks[level][mask]
        groups.append(s)
        mask ^= s
        level -= 1

    assignment = np.empty(size, dtype=np.int64)
    if centers == "medoid":
        medoids = []
        for s in groups:
            med = int(choice[position[s]])
            if med not in medoids:
                medoids.append(med)
            assignment[bits[position[s]]] = medoids.index(med)
        cs = CenterSet.from_indices(dataset, medoids, k=k)
    else:
        coords = []
        for t, s in enumerate(groups):
            coords.append(means[position[s]])
            assignment[bits[position[s]]] = t
        cs = CenterSet(coords=np.array(coords), k=k)
    return make_clustering(dataset, cs, assignment, norm, oracle="brute_fair_opt")


def brute_fixed_center_assignment(dataset: ColoredDataset, centers: CenterSet, norm: NormSpec, sizes=None):
    """Best balanced assignment to fixed centers (optionally with fixed per-center sizes).

    Enumerates every map from each color class to the centers. Returns the
    FairClustering, or None when ``sizes`` admit no assignment.
    """
    kc = len(centers)
    n = dataset.per_color_count
    count = kc ** n
    if count > MAX_ENUMERATION:
        raise InstanceTooLargeError(f"{kc}^{n} assignments per color is too many")
    words = _digits(count, kc, n)
    hist = np.zeros((count, kc), dtype=np.int64)
    for c in range(kc):
        hist[:, c] = (words == c).sum(axis=1)
    radix = (n + 1) ** np.arange(kc, dtype=np.int64)
    keys = hist @ radix
    nkeys = (n + 1) ** kc

    per_color = []
    total = np.zeros(nkeys) if norm.p is not INF else np.full(nkeys, -np.inf)
    for color in range(dataset.num_colors):
        d = dataset.distances_to_centers(dataset.class_indices(color), centers, norm.q)
        w = d if norm.p is INF else norm.power(d)
        picked = w[np.arange(n)[None, :], words]
        vals = picked.max(axis=1) if norm.p is INF else picked.sum(axis=1)
        best = np.full(nkeys, np.inf)
        np.minimum.at(best, keys, vals)
        per_color.append((vals, best))
        total = np.maximum(total, best) if norm.p is INF else total + best

    if sizes is not None:
        target = int(np.asarray(sizes, dtype=np.int64) @ radix)
        if not np.isfinite(total[target]):
            return None
        key = target
    else:
        key = int(np.argmin(total))

    assignment = np.empty(len(dataset), dtype=np.int64)
    for color, (vals, best) in enumerate(per_color):
        row = int(np.flatnonzero((keys == key) & (vals == best[key]))[0])
        assignment[dataset.class_indices(color)] = words[row]
    return make_clustering(dataset, centers, assignment, norm, oracle="brute_fixed_center_assignment")


def brute_transport(costs, demands):
    """Cheapest map of sources to centers with exactly ``demands`` per center.

    Returns (assignment, cost) or None if the demands cannot be met.
    """
    costs = np.asarray(costs, dtype=float)
    demands = np.asarray(demands, dtype=np.int64)
    n, kc = costs.shape
    count = kc ** n
    if count > MAX_ENUMERATION:
        raise InstanceTooLargeError(f"{kc}^{n} assignments is too many")
    words = _digits(count, kc, n)
    ok = np.ones(count, dtype=bool)
    for c in range(kc):
        ok &= (words == c).sum(axis=1) == demands[c]
    if not ok.any():
        return None
    words = words[ok]
    vals = costs[np.arange(n)[None, :], words].sum(axis=1)
    best = int(np.argmin(vals))
    return words[best], math.fsum(costs[np.arange(n), words[best]])
