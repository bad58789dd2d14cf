import numpy as np
import pytest

from fairkclust.core import INF, CenterSet, ColoredDataset, NormSpec, make_clustering, verify_balance
from fairkclust.fair_center import fair_kcenter_assign, fair_kcenter_centers, kcenter_fairlets
from fairkclust.oracle import brute_fair_opt, brute_fixed_center_assignment, brute_unconstrained_opt

from conftest import line_dataset, random_dataset


class TestCenters:
    def test_k1_seeded(self, rng):
        ds = random_dataset(rng, 2, 4)
        got = fair_kcenter_centers(ds, 1, first=5)
        assert got.order.tolist() == [5]

    def test_line(self):
        ds = line_dataset([0, 100], [1, 101])
        got = fair_kcenter_centers(ds, 2, first=0, q=1)
        assert float(got.centers.coords[1, 0]) in (100.0, 101.0)

    def test_trace_non_increasing_and_distinct(self, rng):
        ds = random_dataset(rng, 4, 20)
        got = fair_kcenter_centers(ds, 12, seed=3)
        assert all(b <= a for a, b in zip(got.radius_trace, got.radius_trace[1:]))
        assert len(set(got.order.tolist())) == 12

    def test_gonzalez_bound(self, rng):
        for seed in range(15):
            ds = random_dataset(rng, 3, 4)
            got = fair_kcenter_centers(ds, 3, seed=seed)
            radius = got.radius_trace[-1]
            opt = brute_unconstrained_opt(ds.points, 3, NormSpec(INF, 2)).cost
            assert radius <= 2 * opt + 1e-12

    def test_existence_bound_small(self, rng):
        for seed in range(40):
            ell = int(rng.integers(2, 4))
            ds = random_dataset(rng, ell, int(rng.integers(1, 5)))
            k = int(rng.integers(1, 3))
            centers = fair_kcenter_centers(ds, k, seed=seed).centers
            best = brute_fixed_center_assignment(ds, centers, NormSpec(INF, 2))
            assert best.cost <= 3 * brute_fair_opt(ds, k, NormSpec(INF, 2)).cost * (1 + 1e-9)


class TestAssign:
    def test_one_color_nearest(self, rng):
        pts = rng.normal(size=(10, 2))
        ds = ColoredDataset(points=pts, colors=np.zeros(10, int))
        centers = CenterSet.from_indices(ds, [0, 4])
        cl = fair_kcenter_assign(ds, centers)
        d = ds.distances_to_centers(np.arange(10), centers, 2)
        assert cl.assignment.tolist() == np.argmin(d, axis=1).tolist()

    def test_coincident_two_colors(self, rng):
        pts = rng.normal(size=(6, 2))
        ds = ColoredDataset(points=np.vstack([pts, pts]), colors=[0] * 6 + [1] * 6)
        centers = CenterSet.from_indices(ds, [0, 3])
        cl = fair_kcenter_assign(ds, centers)
        unconstrained = ds.distances_to_centers(np.arange(12), centers, 2).min(axis=1).max()
        assert cl.cost == pytest.approx(unconstrained, rel=1e-12)

    @pytest.mark.parametrize("ell", [2, 3, 4])
    def test_feasible_and_not_below_oracle(self, rng, ell):
        for seed in range(15):
            ds = random_dataset(rng, ell, 3)
            centers = fair_kcenter_centers(ds, 2, seed=seed).centers
            cl = fair_kcenter_assign(ds, centers, seed=seed)
            assert verify_balance(ds, cl)[0]
            best = brute_fixed_center_assignment(ds, centers, NormSpec(INF, 2))
            assert cl.cost >= best.cost - 1e-12
            if ell == 2:
                assert cl.cost == best.cost

    def test_precomputed_fairlets_reused(self, rng):
        ds = random_dataset(rng, 3, 8)
        centers = fair_kcenter_centers(ds, 3, seed=1).centers
        fl = kcenter_fairlets(ds, 2, seed=9)
        a = fair_kcenter_assign(ds, centers, seed=9)
        b = fair_kcenter_assign(ds, centers, fairlets=fl)
        assert np.array_equal(a.assignment, b.assignment)
