import math

import numpy as np
import pytest

from fairkclust.core import INF, CenterSet, ColoredDataset, NormSpec, verify_balance
from fairkclust.errors import MissingMatchingError
from fairkclust.fair_reduce import (algorithm1, algorithm2, assign_via_matchings, cluster_fairlets, derive_seed,
                                    sample_count, solve_base_colors, variant_excellent, variant_q)
from fairkclust.matching import emd, pairwise_emd_table
from fairkclust.oracle import brute_fair_opt
from fairkclust.solvers import SolverConfig, run_solver

from conftest import line_dataset, random_dataset

EXACT = SolverConfig("exact", center_pool="all")
EXACT_CLASS = SolverConfig("exact")
L1 = NormSpec(1, 1)


class TestAlgorithm1:
    def test_one_color_is_solver_output(self, rng):
        pts = rng.normal(size=(12, 2))
        ds = ColoredDataset(points=pts, colors=np.zeros(12, int))
        cfg = SolverConfig(seed=3)
        res = algorithm1(ds, 3, NormSpec(), cfg)
        centers, solo = run_solver(ds, np.arange(12), 3, NormSpec(), cfg, seed=derive_seed(3, 0))
        assert res.cost == pytest.approx(solo.cost, rel=1e-12)
        assert np.array_equal(res.clustering.center_set.indices, centers.indices)

    def test_hand_instance(self, hand_instance):
        # base {0,10}: the first optimal medoid is 0 -> everything at 0 costs 22
        # base {1,11}: its optimal medoid 1 (class pool) or 10 (all points) costs 20
        for cfg in (EXACT_CLASS, EXACT):
            res = algorithm1(hand_instance, 1, L1, cfg)
            assert res.per_color_candidates == {0: 22.0, 1: 20.0}
            assert res.cost == 20.0 and res.base_color == 1
            assert res.cost == brute_fair_opt(hand_instance, 1, L1).cost

    def test_cost_is_min_over_candidates(self, rng):
        ds = random_dataset(rng, 4, 6)
        res = algorithm1(ds, 2, NormSpec(), SolverConfig(seed=1))
        assert res.cost == min(res.per_color_candidates.values())
        assert verify_balance(ds, res.clustering)[0]

    def test_three_approximation_small(self, rng):
        for _ in range(60):
            ell = int(rng.integers(2, 4))
            ds = random_dataset(rng, ell, int(rng.integers(1, 12 // ell + 1)))
            k = int(rng.integers(1, 3))
            norm = [NormSpec(1, 2), NormSpec(2, 1), NormSpec(INF, 2)][int(rng.integers(3))]
            assert algorithm1(ds, k, norm, EXACT).cost <= 3 * brute_fair_opt(ds, k, norm).cost * (1 + 1e-9)

    def test_kmeans_mode(self, rng):
        ds = random_dataset(rng, 2, 6)
        res = algorithm1(ds, 2, NormSpec(2, 2), SolverConfig("lloyd_kmeans"))
        assert verify_balance(ds, res.clustering)[0]

    def test_metric_matrix_mode(self, rng):
        pts = rng.normal(size=(8, 2))
        dm = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        ds = ColoredDataset(distance_matrix=dm, colors=[0, 1] * 4)
        ref = ColoredDataset(points=pts, colors=[0, 1] * 4)
        a = algorithm1(ds, 2, NormSpec(1, 2), EXACT)
        b = algorithm1(ref, 2, NormSpec(1, 2), EXACT)
        assert a.cost == pytest.approx(b.cost, rel=1e-9)


class TestVariantQ:
    def test_one_color(self, rng):
        ds = ColoredDataset(points=rng.normal(size=(9, 2)), colors=np.zeros(9, int))
        assert variant_q(ds, 2, NormSpec(), SolverConfig()).base_color == 0

    def test_symmetric_tie_goes_to_first_color(self):
        ds = line_dataset([0, 10], [0, 10])
        res = variant_q(ds, 1, L1, EXACT)
        assert res.base_color == 0

    @pytest.mark.parametrize("norm", [NormSpec(1, 2), NormSpec(2, 2), NormSpec(INF, 2)])
    def test_picks_argmin_aggregated_emd(self, rng, norm):
        ds = random_dataset(rng, 5, 6)
        res = variant_q(ds, 2, norm, SolverConfig())
        agg = [norm.aggregate([emd(ds, i, j, norm) for j in range(5)]) for i in range(5)]
        assert agg[res.base_color] == min(agg)

    def test_single_solver_call(self, rng, monkeypatch):
        import fairkclust.fair_reduce as fr
        calls = []
        original = fr.run_solver
        monkeypatch.setattr(fr, "run_solver", lambda *a, **kw: calls.append(1) or original(*a, **kw))
        variant_q(random_dataset(rng, 4, 5), 2, NormSpec(), SolverConfig())
        assert len(calls) == 1

    def test_five_approximation_small(self, rng):
        for _ in range(60):
            ell = int(rng.integers(2, 4))
            ds = random_dataset(rng, ell, int(rng.integers(1, 12 // ell + 1)))
            k = int(rng.integers(1, 3))
            assert variant_q(ds, k, NormSpec(), EXACT).cost <= 5 * brute_fair_opt(ds, k, NormSpec()).cost * (1 + 1e-9)


class TestExcellent:
    def test_one_color(self, rng):
        ds = ColoredDataset(points=rng.normal(size=(10, 2)), colors=np.zeros(10, int))
        cfg = SolverConfig(seed=2)
        res = variant_excellent(ds, 3, NormSpec(), cfg)
        assert res.cost == pytest.approx(algorithm1(ds, 3, NormSpec(), cfg).cost, rel=1e-12)

    @pytest.mark.parametrize("norm", [NormSpec(1, 2), NormSpec(2, 2), NormSpec(INF, 2)])
    def test_not_worse_than_algorithm1(self, rng, norm):
        for _ in range(10):
            ds = random_dataset(rng, int(rng.integers(2, 6)), 8)
            sols = solve_base_colors(ds, 3, norm, SolverConfig(seed=5))
            ex = variant_excellent(ds, 3, norm, SolverConfig(), solutions=sols)
            a1 = algorithm1(ds, 3, norm, SolverConfig(), solutions=sols)
            assert ex.cost <= a1.cost * (1 + 1e-9)
            assert verify_balance(ds, ex.clustering)[0]

    def test_three_approximation_small(self, rng):
        for _ in range(40):
            ds = random_dataset(rng, 2, int(rng.integers(1, 7)))
            assert variant_excellent(ds, 2, NormSpec(), EXACT).cost <= 3 * brute_fair_opt(ds, 2, NormSpec()).cost + 1e-9


class TestAlgorithm2:
    def test_sample_count(self):
        assert sample_count(0.1) == 4
        assert sample_count(0.5) == 1
        assert sample_count(0.9) == 1
        with pytest.raises(ValueError):
            sample_count(1.0)

    def test_one_color_zero_cost(self, rng):
        ds = ColoredDataset(points=rng.normal(size=(6, 2)), colors=np.zeros(6, int))
        res = algorithm2(ds, NormSpec(1, 2))
        assert res.cost == 0 and res.clustering.k == 6

    def test_two_colors_equal_emd(self, rng):
        for seed in range(10):
            ds = random_dataset(rng, 2, 6)
            assert algorithm2(ds, NormSpec(1, 2), seed=seed).cost == pytest.approx(emd(ds, 0, 1, NormSpec(1, 2)),
                                                                                    rel=1e-12)

    def test_two_colors_optimal_fairlets(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 7))
            ds = random_dataset(rng, 2, n)
            assert algorithm2(ds, NormSpec(1, 2)).cost == pytest.approx(brute_fair_opt(ds, n, NormSpec(1, 2)).cost,
                                                                         rel=1e-12)

    def test_fairlets_have_one_point_per_color(self, rng):
        ds = random_dataset(rng, 5, 7)
        res = algorithm2(ds, NormSpec(1, 2), seed=4)
        ok, hist = verify_balance(ds, res.clustering)
        assert ok and np.all(hist == 1)
        base = ds.class_indices(res.base_color)
        assert np.array_equal(res.clustering.center_set.indices, base)

    def test_greedy_mode(self, rng):
        ds = random_dataset(rng, 3, 6)
        exact = algorithm2(ds, NormSpec(1, 2), seed=1)
        greedy = algorithm2(ds, NormSpec(1, 2), seed=1, emd_mode="greedy")
        assert verify_balance(ds, greedy.clustering)[0]
        assert greedy.clustering.meta["emd_mode"] == "greedy" and exact.clustering.meta["emd_mode"] == "exact"

    def test_scores_every_color_for_sampled_bases(self, rng):
        ds = random_dataset(rng, 4, 5)
        res = algorithm2(ds, NormSpec(1, 2), seed=7)
        table = pairwise_emd_table(ds, NormSpec(1, 2))
        for t, score in res.per_color_candidates.items():
            assert score == pytest.approx(math.fsum(table.values[t]), rel=1e-12)


class TestAssignViaMatchings:
    def test_single_center(self, rng):
        ds = random_dataset(rng, 3, 4)
        table = pairwise_emd_table(ds, NormSpec())
        cl = assign_via_matchings(1, CenterSet.from_indices(ds, [2]), table, ds, NormSpec())
        assert np.all(cl.assignment == 0)

    def test_tie_goes_to_lowest_center(self):
        ds = line_dataset([5], [5])
        table = pairwise_emd_table(ds, L1)
        cl = assign_via_matchings(0, CenterSet(coords=[[4.0], [6.0]]), table, ds, L1)
        assert cl.assignment.tolist() == [0, 0]

    def test_hand_instance(self, hand_instance):
        table = pairwise_emd_table(hand_instance, L1)
        cl = assign_via_matchings(0, CenterSet.from_indices(hand_instance, [0]), table, hand_instance, L1)
        assert cl.assignment.tolist() == [0, 0, 0, 0] and cl.cost == 22

    def test_missing_matching(self, rng):
        ds = random_dataset(rng, 3, 2)
        table = pairwise_emd_table(ds, NormSpec())
        partial = {key: m for key, m in table.matchings.items() if key != (0, 2)}
        with pytest.raises(MissingMatchingError):
            assign_via_matchings(0, CenterSet.from_indices(ds, [0]), partial, ds, NormSpec())


def test_cluster_fairlets_balanced(rng):
    ds = random_dataset(rng, 4, 10)
    fl = algorithm2(ds, NormSpec(1, 2)).clustering.assignment
    cl = cluster_fairlets(ds, fl, 3, NormSpec(1, 2), SolverConfig(), seed=1)
    assert verify_balance(ds, cl)[0]


def test_derive_seed():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(1, c) for c in range(50)}) == 50
    assert derive_seed(1, 2) != derive_seed(2, 1)
