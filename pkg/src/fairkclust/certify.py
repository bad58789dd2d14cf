"""Ratio certificates on random tiny instances against the exhaustive oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import INF, ColoredDataset, NormSpec
from .fair_center import fair_kcenter_centers
from .fair_reduce import algorithm1, derive_seed, variant_q
from .oracle import MAX_POINTS, brute_fair_opt, brute_fixed_center_assignment
from .solvers import SolverConfig

BOUNDS = {"algorithm1": 3.0, "variant_q": 5.0, "fair_kcenter": 3.0}
EXACT_SOLVER = SolverConfig("exact", center_pool="all")


def ratio(value: float, opt: float) -> float:
    if opt > 0:
        return value / opt
    return 1.0 if value <= 1e-12 else math.inf


def random_instance(rng: np.random.Generator, colors=(2, 3), max_n: int = 4, max_k: int = 2, dim: int = 2):
    """(dataset, k, norm) with ell * n <= the oracle point limit."""
    ell = int(rng.choice(colors))
    n = int(rng.integers(1, min(max_n, MAX_POINTS // ell) + 1))
    k = int(rng.integers(1, max_k + 1))
    p = [1, 2, INF][int(rng.integers(3))]
    q = [1, 2][int(rng.integers(2))]
    points = rng.uniform(0.0, 10.0, size=(ell * n, dim))
    labels = np.repeat(np.arange(ell), n)
    return ColoredDataset(points=points, colors=labels), k, NormSpec(p, q)


@dataclass
class Certificate:
    trials: int = 0
    worst: dict = field(default_factory=lambda: {m: 0.0 for m in BOUNDS})
    violations: dict = field(default_factory=lambda: {m: 0 for m in BOUNDS})

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def add(self, method: str, value: float, opt: float):
        r = ratio(value, opt)
        self.worst[method] = max(self.worst[method], r)
        if r > BOUNDS[method] * (1 + 1e-9):
            self.violations[method] += 1

    def report(self) -> dict:
        return {"trials": self.trials, "bounds": dict(BOUNDS), "max_ratio": dict(self.worst),
                "violations": dict(self.violations), "ok": self.ok}


def certify(trials: int = 1000, seed: int = 0, colors=(2, 3), max_n: int = 4, max_k: int = 2,
            methods=tuple(BOUNDS)) -> Certificate:
    """Worst observed ratio to the fair optimum for each method.

    algorithm1 and variant_q use the exact inner solver (centers from all points,
    matching the oracle's medoid convention). fair_kcenter compares the best
    balanced assignment to the farthest-first centers (brute force) against the
    fair k-center optimum, both under the max-distance objective.
    """
    cert = Certificate()
    for t in range(trials):
        rng = np.random.default_rng(derive_seed(seed, t))
        ds, k, norm = random_instance(rng, colors, max_n, max_k)
        if "algorithm1" in methods or "variant_q" in methods:
            opt = brute_fair_opt(ds, k, norm).cost
            if "algorithm1" in methods:
                cert.add("algorithm1", algorithm1(ds, k, norm, EXACT_SOLVER).cost, opt)
            if "variant_q" in methods:
                cert.add("variant_q", variant_q(ds, k, norm, EXACT_SOLVER).cost, opt)
        if "fair_kcenter" in methods:
            kc_norm = NormSpec(INF, norm.q)
            kk = min(k, len(ds))
            centers = fair_kcenter_centers(ds, kk, seed=derive_seed(seed, t, 1), q=norm.q).centers
            best = brute_fixed_center_assignment(ds, centers, kc_norm)
            cert.add("fair_kcenter", best.cost, brute_fair_opt(ds, kk, kc_norm).cost)
        cert.trials += 1
    return cert
