"""Fair-to-unfair reductions: matching relay over every base color (``algorithm1``),
the single-color variant (``variant_q``), transport-based assignment
(``variant_excellent``) and sampled fairlet decomposition (``algorithm2``)."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .assignment import TransportInstance, bottleneck_transport, min_cost_transport
from .core import INF, CenterSet, ColoredDataset, FairClustering, NormSpec, make_clustering
from .errors import MissingMatchingError
from .matching import EMDTable, match_classes, pairwise_emd_table
from .solvers import SolverConfig, SolverResult, run_solver


def derive_seed(master: int, *keys: int) -> int:
    """Independent, reproducible child seed for (master, keys...)."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(x) for x in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass
class BaseSolution:
    color: int
    centers: CenterSet
    result: SolverResult
    seconds: float


@dataclass
class ReductionResult:
    clustering: FairClustering
    base_color: int
    per_color_candidates: dict
    emd_table: EMDTable | None
    wall_times: dict = field(default_factory=dict)
    method: str = ""

    @property
    def cost(self) -> float:
        return self.clustering.cost


def solve_base_colors(dataset: ColoredDataset, k: int, norm: NormSpec, config: SolverConfig, colors=None) -> dict:
    """Unconstrained clustering of each requested color class, seeded by (seed, color)."""
    out = {}
    for color in range(dataset.num_colors) if colors is None else colors:
        t0 = time.perf_counter()
        centers, res = run_solver(dataset, dataset.class_indices(color), k, norm, config,
                                  seed=derive_seed(config.seed, color))
        out[color] = BaseSolution(color, centers, res, time.perf_counter() - t0)
    return out


def nearest_center(dataset: ColoredDataset, rows, centers: CenterSet, q) -> np.ndarray:
    """Index of the nearest center per row, lowest index on ties."""
    return np.argmin(dataset.distances_to_centers(rows, centers, q), axis=1)


def assign_via_matchings(base: int, centers: CenterSet, matchings, dataset: ColoredDataset, norm: NormSpec) -> FairClustering:
    """Base points go to their nearest center; every other point follows its matched base partner.

    ``matchings`` maps (base, j) to a Matching from class ``base`` to class j (an
    EMDTable works too).
    """
    lookup = matchings.matchings.__getitem__ if isinstance(matchings, EMDTable) else matchings.__getitem__
    base_rows = dataset.class_indices(base)
    base_slot = nearest_center(dataset, base_rows, centers, norm.q)
    assignment = np.empty(len(dataset), dtype=np.int64)
    for j in range(dataset.num_colors):
        rows = dataset.class_indices(j)
        if j == base:
            assignment[rows] = base_slot
            continue
        try:
            perm = lookup((base, j)).permutation
        except KeyError:
            raise MissingMatchingError(f"no matching between colors {base} and {j}") from None
        assignment[rows[perm]] = base_slot
    return make_clustering(dataset, centers, assignment, norm, base_color=base)


def _pick(costs: dict) -> int:
    # lowest color wins ties
    return min(costs, key=lambda c: (costs[c], c))


def _table(dataset, norm, emd_table, colors=None):
    if emd_table is not None:
        return emd_table, 0.0
    t0 = time.perf_counter()
    table = pairwise_emd_table(dataset, norm, "exact", colors=colors)
    return table, time.perf_counter() - t0


def algorithm1(dataset: ColoredDataset, k: int, norm: NormSpec, solver_config: SolverConfig, *,
               emd_table: EMDTable | None = None, solutions: dict | None = None) -> ReductionResult:
    """Try every color as base: cluster it, relay the other colors through their optimal
    matchings to it, keep the cheapest fair clustering."""
    table, t_emd = _table(dataset, norm, emd_table)
    solutions = solutions or solve_base_colors(dataset, k, norm, solver_config)
    t0 = time.perf_counter()
    candidates, results = {}, {}
    for i in range(dataset.num_colors):
        results[i] = assign_via_matchings(i, solutions[i].centers, table, dataset, norm)
        candidates[i] = results[i].cost
    best = _pick(candidates)
    times = {"emd": t_emd, "solver": sum(solutions[i].seconds for i in range(dataset.num_colors)),
             "assign": time.perf_counter() - t0}
    return ReductionResult(results[best], best, candidates, table, times, "algorithm1")


def variant_q(dataset: ColoredDataset, k: int, norm: NormSpec, solver_config: SolverConfig, *,
              emd_table: EMDTable | None = None, solutions: dict | None = None) -> ReductionResult:
    """Cluster only the color whose aggregated EMD to all other colors is smallest."""
    table, t_emd = _table(dataset, norm, emd_table)
    agg = table.aggregated()
    scores = {i: float(agg[i]) for i in range(dataset.num_colors)}
    best = _pick(scores)
    if solutions is None or best not in solutions:
        solutions = solve_base_colors(dataset, k, norm, solver_config, colors=[best])
    t0 = time.perf_counter()
    clustering = assign_via_matchings(best, solutions[best].centers, table, dataset, norm)
    times = {"emd": t_emd, "solver": solutions[best].seconds, "assign": time.perf_counter() - t0}
    return ReductionResult(clustering, best, {best: clustering.cost}, table, times, "variant_q")


def transport_assign(dataset: ColoredDataset, base: int, centers: CenterSet, norm: NormSpec) -> FairClustering:
    """Base color to nearest centers; that histogram fixes the sizes every other color
    must match, solved exactly by transport."""
    base_rows = dataset.class_indices(base)
    base_slot = nearest_center(dataset, base_rows, centers, norm.q)
    sizes = np.bincount(base_slot, minlength=len(centers))
    assignment = np.empty(len(dataset), dtype=np.int64)
    assignment[base_rows] = base_slot
    for j in range(dataset.num_colors):
        if j == base:
            continue
        rows = dataset.class_indices(j)
        d = dataset.distances_to_centers(rows, centers, norm.q)
        if norm.p is INF:
            res = bottleneck_transport(d, sizes)
        else:
            res = min_cost_transport(TransportInstance(norm.power(d), sizes))
        assignment[rows] = res.assignment
    return make_clustering(dataset, centers, assignment, norm, base_color=base, sizes=sizes.tolist())


def variant_excellent(dataset: ColoredDataset, k: int, norm: NormSpec, solver_config: SolverConfig, *,
                      solutions: dict | None = None) -> ReductionResult:
    """Per base color, keep its clustering and re-assign other colors by optimal transport
    under the base color's cluster sizes. Cheapest over all base colors."""
    solutions = solutions or solve_base_colors(dataset, k, norm, solver_config)
    t0 = time.perf_counter()
    candidates, results = {}, {}
    for i in range(dataset.num_colors):
        results[i] = transport_assign(dataset, i, solutions[i].centers, norm)
        candidates[i] = results[i].cost
    best = _pick(candidates)
    times = {"solver": sum(solutions[i].seconds for i in range(dataset.num_colors)),
             "assign": time.perf_counter() - t0}
    return ReductionResult(results[best], best, candidates, None, times, "variant_excellent")


def sample_count(delta: float) -> int:
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return max(1, math.ceil(math.log2(1.0 / delta)))


def algorithm2(dataset: ColoredDataset, norm: NormSpec | None = None, delta: float = 0.1, emd_mode: str = "exact",
               seed: int = 0, *, emd_table: EMDTable | None = None) -> ReductionResult:
    """Randomized fairlet decomposition.

    Draws ceil(log2(1/delta)) colors uniformly with replacement, scores each by the
    aggregated EMD to every color, and returns the n fairlets induced by the best
    one: fairlet s is the s-th base point plus its matched partner in each color,
    centered at the base point. A precomputed exact ``emd_table`` is reused when given.
    """
    norm = norm or NormSpec(1, 2)
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    drawn = rng.integers(dataset.num_colors, size=sample_count(delta))
    scores, matchings = {}, {}
    for t in dict.fromkeys(int(x) for x in drawn):
        row = []
        for j in range(dataset.num_colors):
            if emd_table is not None and emd_mode == "exact":
                m = emd_table.matching(t, j)
            else:
                m = match_classes(dataset, t, j, norm, emd_mode)
            matchings[(t, j)] = m
            row.append(m.cost)
        scores[t] = norm.aggregate(row)
    best = _pick(scores)
    centers = CenterSet.from_indices(dataset, dataset.class_indices(best))
    assignment = np.empty(len(dataset), dtype=np.int64)
    for j in range(dataset.num_colors):
        rows = dataset.class_indices(j)
        assignment[rows[matchings[(best, j)].permutation]] = np.arange(dataset.per_color_count)
    clustering = make_clustering(dataset, centers, assignment, norm, base_color=best, sampled=drawn.tolist(),
                                 emd_mode=emd_mode)
    return ReductionResult(clustering, best, scores, emd_table, {"total": time.perf_counter() - t0}, "algorithm2")


def fairlet_representatives(dataset: ColoredDataset, fairlet_ids, norm: NormSpec) -> np.ndarray:
    """Medoid of every fairlet (in fairlet-id order)."""
    fairlet_ids = np.asarray(fairlet_ids)
    reps = []
    for f in np.unique(fairlet_ids):
        rows = np.flatnonzero(fairlet_ids == f)
        w = norm.power(dataset.distances(rows, rows, norm.q))
        reps.append(int(rows[np.argmin(w.max(axis=0) if norm.p is INF else w.sum(axis=0))]))
    return np.array(reps, dtype=np.int64)


def cluster_fairlets(dataset: ColoredDataset, fairlet_ids, k: int, norm: NormSpec, solver_config: SolverConfig, *,
                     representatives=None, solution: BaseSolution | None = None, seed: int | None = None) -> FairClustering:
    """Cluster fairlet representatives without constraints and move whole fairlets
    with them. Balanced whenever every fairlet is balanced.

    ``representatives[f]`` is the row representing the f-th fairlet (sorted ids);
    defaults to fairlet medoids. A precomputed ``solution`` over exactly those rows
    may be passed in.
    """
    fairlet_ids = np.asarray(fairlet_ids)
    ids, inverse, sizes = np.unique(fairlet_ids, return_inverse=True, return_counts=True)
    reps = fairlet_representatives(dataset, fairlet_ids, norm) if representatives is None else np.asarray(representatives)
    if solution is None:
        weights = None if np.all(sizes == sizes[0]) else sizes
        centers, _ = run_solver(dataset, reps, k, norm, solver_config, seed=seed, weights=weights)
    else:
        centers = solution.centers
    rep_slot = nearest_center(dataset, reps, centers, norm.q)
    return make_clustering(dataset, centers, rep_slot[inverse], norm, fairlets=len(ids))


def fairlet_ids_of(result: ReductionResult) -> np.ndarray:
    """Fairlet id per point for an algorithm2 result (its cluster index)."""
    return np.asarray(result.clustering.assignment)
