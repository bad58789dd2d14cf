"""Benchmark harness: the method matrix over samples and k, plus table aggregation.

Records are plain dicts. ``results.csv`` carries everything except timings so that
two runs with the same master seed are byte-identical; timings go to a separate
``timings.csv`` and into the JSON output.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import INF, CenterSet, ColoredDataset, NormSpec, make_clustering, verify_balance
from .data import DatasetSpec, balanced_subsample, prepare
from .errors import DataError, FairClusteringError
from .fair_center import fair_kcenter_assign, fair_kcenter_centers, kcenter_fairlets
from .fair_reduce import (BaseSolution, algorithm1, algorithm2, assign_via_matchings, cluster_fairlets, derive_seed,
                          solve_base_colors, variant_excellent, variant_q)
from .matching import pairwise_emd_table
from .solvers import SolverConfig, kmedoids_refine, kpp_seed

log = logging.getLogger(__name__)

# Canonical method order; also the row order of emitted tables.
METHODS = ("kmedian++", "algorithm1", "variant_q", "variant_excellent", "algorithm2", "fair_kcenter", "fairlets",
           "external_fairlets")
DEFAULT_METHODS = METHODS[:7]
FAIR_METHODS = ("algorithm1", "variant_q", "variant_excellent", "algorithm2", "fair_kcenter", "external_fairlets")
DEFAULT_BUCKETS = ((2, 5), (6, 10), (11, 20))

RESULT_FIELDS = ("dataset", "sample_id", "method", "k", "cost", "balanced", "base_color", "radius", "seed", "status")
TIMING_FIELDS = ("dataset", "sample_id", "method", "k", "wall_time_ms")


@dataclass(frozen=True)
class RunConfig:
    methods: tuple = DEFAULT_METHODS
    k_range: tuple = tuple(range(2, 21))
    norm: NormSpec = field(default_factory=NormSpec)
    seed: int = 0
    solver: str = "local_search_kmedian"
    delta: float = 0.1
    num_samples: int | None = None  # overrides the spec
    subsample_size: int | None = None

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if not self.k_range or min(self.k_range) < 1:
            raise ValueError("k values must be positive")


def _record(spec_name, sample_id, method, k, seed, *, cost=math.nan, balanced=False, base_color=None, radius=None,
            status="ok", ms=0.0):
    return {"dataset": spec_name, "sample_id": sample_id, "method": method, "k": k, "cost": float(cost),
            "balanced": bool(balanced), "base_color": base_color, "radius": radius, "seed": seed, "status": status,
            "wall_time_ms": ms}


def _timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def run_sample(spec_name: str, dataset: ColoredDataset, sample_id: int, sample_seed: int, cfg: RunConfig,
               fairlets=None) -> list:
    """All requested (method, k) records for one balanced sample."""
    norm = cfg.norm
    methods = set(cfg.methods)
    solver = SolverConfig(cfg.solver, seed=sample_seed)
    records = []

    def emit(method, k, clustering, seconds, **extra):
        ok, _ = verify_balance(dataset, clustering)
        records.append(_record(spec_name, sample_id, method, k, sample_seed, cost=clustering.cost, balanced=ok,
                               ms=seconds * 1000.0, **extra))

    needs_table = methods & {"algorithm1", "variant_q", "algorithm2", "fairlets"}
    table, t_table = _timed(pairwise_emd_table, dataset, norm) if needs_table else (None, 0.0)
    needs_fairlets = methods & {"algorithm2"}
    fl, t_fl = (_timed(algorithm2, dataset, norm, delta=cfg.delta, seed=derive_seed(sample_seed, 2), emd_table=table)
                if needs_fairlets else (None, 0.0))
    allrows = np.arange(len(dataset))
    if "kmedian++" in methods:
        dall, t_dall = _timed(dataset.distances, allrows, allrows, norm.q)
    if "fair_kcenter" in methods:
        kmax = min(max(cfg.k_range), len(dataset))
        order, t_order = _timed(fair_kcenter_centers, dataset, kmax, seed=derive_seed(sample_seed, 3), q=norm.q)
        kfl, t_kfl = (_timed(kcenter_fairlets, dataset, norm.q, seed=derive_seed(sample_seed, 4), delta=cfg.delta)
                      if dataset.num_colors >= 3 else (None, 0.0))
    lower = None
    if "fairlets" in methods:
        agg = table.aggregated()
        best = int(np.argmin(agg))
        base_rows = dataset.class_indices(best)
        lower = assign_via_matchings(best, CenterSet.from_indices(dataset, base_rows), table, dataset, norm)

    for k in cfg.k_range:
        need_all = methods & {"algorithm1", "variant_excellent"}
        if need_all:
            sols = solve_base_colors(dataset, k, norm, solver)
        else:
            colors = set()
            if "variant_q" in methods:
                colors.add(int(np.argmin(table.aggregated())))
            if "algorithm2" in methods:
                colors.add(fl.base_color)
            sols = solve_base_colors(dataset, k, norm, solver, colors=sorted(colors)) if colors else {}
        solver_all = sum(s.seconds for s in sols.values())

        if "kmedian++" in methods:
            t0 = time.perf_counter()
            kk = min(k, len(dataset))
            init = kpp_seed(dall, kk, norm, derive_seed(sample_seed, 1, k), precomputed=True)
            res = kmedoids_refine(dall, init, norm, solver, precomputed=True)
            cl = make_clustering(dataset, CenterSet.from_indices(dataset, res.centers, k=k),
                                 np.argmin(dall[:, res.centers], axis=1), norm)
            emit("kmedian++", k, cl, time.perf_counter() - t0 + t_dall)
        if "algorithm1" in methods:
            r = algorithm1(dataset, k, norm, solver, emd_table=table, solutions=sols)
            emit("algorithm1", k, r.clustering, t_table + solver_all + r.wall_times["assign"], base_color=r.base_color)
        if "variant_q" in methods:
            r = variant_q(dataset, k, norm, solver, emd_table=table, solutions=sols)
            emit("variant_q", k, r.clustering, t_table + sols[r.base_color].seconds + r.wall_times["assign"],
                 base_color=r.base_color)
        if "variant_excellent" in methods:
            r = variant_excellent(dataset, k, norm, solver, solutions=sols)
            emit("variant_excellent", k, r.clustering, solver_all + r.wall_times["assign"], base_color=r.base_color)
        if "algorithm2" in methods:
            # fairlets of the sampled base color, clustered through that color's own solution
            base = fl.base_color
            sol = sols[base]
            (cl, t_assign) = _timed(cluster_fairlets, dataset, fl.clustering.assignment, k, norm, solver,
                                    representatives=dataset.class_indices(base), solution=sol)
            emit("algorithm2", k, cl, t_fl + sol.seconds + t_assign, base_color=base)
        if "fair_kcenter" in methods:
            t0 = time.perf_counter()
            kk = min(k, len(dataset))
            centers = CenterSet.from_indices(dataset, order.order[:kk], k=k)
            kc = fair_kcenter_assign(dataset, centers, q=norm.q, seed=derive_seed(sample_seed, 4), delta=cfg.delta,
                                     fairlets=kfl)
            cl = make_clustering(dataset, centers, kc.assignment, norm)
            emit("fair_kcenter", k, cl, t_order + t_kfl + time.perf_counter() - t0, radius=kc.cost)
        if "fairlets" in methods:
            emit("fairlets", k, lower, t_table, base_color=lower.meta.get("base_color"))
        if "external_fairlets" in methods and fairlets is not None:
            cl, secs = _timed(cluster_fairlets, dataset, fairlets, k, norm, solver, seed=derive_seed(sample_seed, 5, k))
            emit("external_fairlets", k, cl, secs)
    return records


def _failed(spec_name, sample_id, sample_seed, cfg, exc):
    status = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
    return [_record(spec_name, sample_id, m, k, sample_seed, status=status) for k in cfg.k_range for m in cfg.methods]


def _sample_task(args):
    spec, feats, colors, sample_id, cfg, fairlets = args
    sample_seed = derive_seed(cfg.seed, sample_id)
    try:
        size = cfg.subsample_size or spec.subsample_size
        dataset = balanced_subsample(feats, colors, size, derive_seed(sample_seed, 0), num_colors=spec.num_colors)
        return run_sample(spec.name, dataset, sample_id, sample_seed, cfg, fairlets=fairlets)
    except FairClusteringError as exc:
        log.warning("sample %d failed: %s", sample_id, exc)
        return _failed(spec.name, sample_id, sample_seed, cfg, exc)


def _method_rank(m):
    return METHODS.index(m)


def canonical(records: list) -> list:
    return sorted(records, key=lambda r: (r["dataset"], r["sample_id"], _method_rank(r["method"]), r["k"]))


def cmd_run(spec: DatasetSpec, cfg: RunConfig, threads: int = 1, fairlets=None) -> list:
    """Run every (sample, method, k). Spec errors fail fast; sample errors become status rows.

    ``fairlets`` maps sample id to a fairlet id per point (the external hook).
    """
    feats, colors, _ = prepare(spec)
    if len(feats) == 0:
        raise DataError(f"{spec.name}: no usable rows")
    samples = cfg.num_samples or spec.num_samples
    fairlets = fairlets or {}
    tasks = [(spec, feats, colors, s, cfg, fairlets.get(s, fairlets.get(None))) for s in range(samples)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_sample_task, tasks))
    else:
        chunks = [_sample_task(t) for t in tasks]
    return canonical([r for chunk in chunks for r in chunk])


def load_fairlets(path) -> dict:
    """External fairlet decomposition file.

    Either a single column of fairlet ids (applied to every sample) or a CSV with a
    header ``sample_id,point,fairlet``. Point indices refer to sample order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: empty fairlet file")
    if [h.strip() for h in rows[0]] == ["sample_id", "point", "fairlet"]:
        out = {}
        for t, (s, pt, f) in enumerate(rows[1:], start=2):
            try:
                out.setdefault(int(s), {})[int(pt)] = int(f)
            except ValueError:
                raise DataError(f"{path}: bad integer on line {t}", rows=[t]) from None
        return {s: np.array([m[i] for i in sorted(m)]) for s, m in out.items()}
    try:
        return {None: np.array([int(r[0]) for r in rows])}
    except ValueError:
        raise DataError(f"{path}: expected one integer fairlet id per line") from None


# --- emission -------------------------------------------------------------------------------------------------


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_fmt(r.get(f)) for f in fields])
    return buf.getvalue()


def records_csv(records) -> str:
    return _write_csv(canonical(records), RESULT_FIELDS)


def timings_csv(records) -> str:
    return _write_csv(canonical(records), TIMING_FIELDS)


def _parse(field_name, text):
    if text == "":
        return None
    if field_name in ("sample_id", "k", "base_color", "seed"):
        return int(text)
    if field_name in ("cost", "radius", "wall_time_ms"):
        return float(text)
    if field_name == "balanced":
        return text == "true"
    return text


def read_records(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    return [{k: _parse(k, v) for k, v in row.items()} for row in reader]


def records_json(records) -> str:
    def clean(r):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}

    return json.dumps([clean(r) for r in canonical(records)], indent=1)


# --- aggregation ----------------------------------------------------------------------------------------------


def bucket_of(k: int, buckets) -> tuple | None:
    for lo, hi in buckets:
        if lo <= k <= hi:
            return (lo, hi)
    return None


def population_std(values) -> float:
    values = sorted(values)
    mean = math.fsum(values) / len(values)
    return math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))


def cmd_table(records, buckets=DEFAULT_BUCKETS, field_name: str = "cost") -> list:
    """Mean and population standard deviation of ``field_name`` per dataset x method x k-bucket.

    Failed records are skipped. Input order does not matter: values are sorted
    before summation.
    """
    groups = {}
    for r in records:
        if r.get("status", "ok") != "ok":
            continue
        b = bucket_of(int(r["k"]), buckets)
        v = r.get(field_name)
        if b is None or v is None or (isinstance(v, float) and math.isnan(v)):
            continue
        groups.setdefault((r["dataset"], r["method"], b), []).append(float(v))
    if not groups:
        raise DataError("no usable records to tabulate")
    rows = []
    for (ds, method, b) in sorted(groups, key=lambda g: (g[0], _method_rank(g[1]), g[2])):
        vals = sorted(groups[(ds, method, b)])
        rows.append({"dataset": ds, "method": method, "bucket": f"{b[0]}-{b[1]}", "count": len(vals),
                     "mean": math.fsum(vals) / len(vals), "std": population_std(vals)})
    return rows


TABLE_FIELDS = ("dataset", "method", "bucket", "count", "mean", "std")


def table_csv(rows) -> str:
    return _write_csv(rows, TABLE_FIELDS)


def table_json(rows, field_name="cost") -> str:
    meta = {"statistic": field_name, "std_convention": "population (divide by count)"}
    return json.dumps({"meta": meta, "rows": rows}, indent=1)


def parse_buckets(text: str) -> tuple:
    """'2-5,6-10,11-20' -> ((2, 5), (6, 10), (11, 20))."""
    out = []
    for part in text.split(","):
        lo, _, hi = part.strip().partition("-")
        out.append((int(lo), int(hi or lo)))
    return tuple(out)


def parse_k_range(text: str) -> tuple:
    """'2-20' or '2,4,8' or '5' -> sorted tuple of ks."""
    ks = set()
    for part in text.split(","):
        lo, sep, hi = part.strip().partition("-")
        ks.update(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return tuple(sorted(ks))
