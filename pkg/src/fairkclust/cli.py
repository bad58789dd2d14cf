"""Command-line entry point: ``fairkclust {run,table,emd,oracle,certify}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .certify import certify
from .core import ColoredDataset, NormSpec
from .data import balanced_subsample, load_spec, prepare
from .errors import DataError, FairClusteringError
from .fair_reduce import derive_seed
from .harness import (DEFAULT_BUCKETS, METHODS, RunConfig, cmd_run, cmd_table, load_fairlets, parse_buckets,
                      parse_k_range, read_records, records_csv, records_json, table_csv, table_json, timings_csv)
from .matching import emd, pairwise_emd_table
from .oracle import brute_fair_opt

log = logging.getLogger("fairkclust")


def _global_flags(parser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(0), help="master seed (default 0)")
    parser.add_argument("--json", action="store_true", default=default(False), help="machine-readable output")
    parser.add_argument("--out", type=Path, default=default(None), help="directory for output files")
    parser.add_argument("--threads", type=int, default=default(1), help="worker processes for sample runs")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairkclust", description="Fair (k,p,q)-clustering toolkit.")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run the method matrix over samples and k")
    run.add_argument("config", help="dataset spec (YAML)")
    run.add_argument("--methods", default=",".join(METHODS[:7]), help=f"comma list from {', '.join(METHODS)}")
    run.add_argument("--k", dest="k_range", default="2-20", help="k values, e.g. 2-20 or 2,5,10")
    run.add_argument("--norm", default="1,2", help="p,q (use inf for infinity)")
    run.add_argument("--samples", type=int, help="override num_samples")
    run.add_argument("--size", type=int, help="override subsample_size")
    run.add_argument("--solver", default="local_search_kmedian",
                     choices=["local_search_kmedian", "kpp_seed_medoids", "farthest_first"])
    run.add_argument("--delta", type=float, default=0.1, help="failure probability for algorithm2")
    run.add_argument("--fairlets", nargs=2, metavar=("external", "FILE"),
                     help="precomputed fairlet ids (adds the external_fairlets method)")

    table = sub.add_parser("table", parents=[common], help="aggregate run records into mean/std per k-bucket")
    table.add_argument("records", help="results.csv from `run`")
    table.add_argument("--buckets", default=",".join(f"{a}-{b}" for a, b in DEFAULT_BUCKETS))
    table.add_argument("--field", default="cost", choices=["cost", "wall_time_ms", "radius"])

    em = sub.add_parser("emd", parents=[common], help="EMD between two point files, or the pairwise table of a spec")
    em.add_argument("config", help="dataset spec (YAML) or a CSV of points")
    em.add_argument("other", nargs="?", help="second CSV of points")
    em.add_argument("--norm", default="1,2")
    em.add_argument("--greedy", action="store_true", help="greedy matching instead of exact")
    em.add_argument("--sample", type=int, default=0, help="sample id when given a spec")

    orc = sub.add_parser("oracle", parents=[common], help="exhaustive fair optimum of a tiny instance")
    orc.add_argument("config", help="CSV of points with a 'color' column")
    orc.add_argument("--k", type=int, required=True)
    orc.add_argument("--norm", default="1,2")
    orc.add_argument("--centers", default="medoid", choices=["medoid", "centroid"])

    cert = sub.add_parser("certify", parents=[common], help="ratio certificates on random tiny instances")
    cert.add_argument("--trials", type=int, default=1000)
    cert.add_argument("--colors", default="2,3", help="color counts to draw from")
    cert.add_argument("--max-n", type=int, default=4)
    cert.add_argument("--max-k", type=int, default=2)
    return parser


def _emit(args, name: str, text: str):
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / name).write_text(text, encoding="utf-8")


def _read_points(path, color_column=None):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        float(header[0])
        header, body = None, [r for r in rows if r]
    except ValueError:
        pass
    colors = None
    if color_column is not None:
        if header is None or color_column not in header:
            raise DataError(f"{path}: needs a '{color_column}' column")
        ci = header.index(color_column)
        colors = [r[ci] for r in body]
        body = [r[:ci] + r[ci + 1:] for r in body]
    try:
        pts = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric value ({exc})") from None
    return pts, colors


def do_run(args):
    spec = load_spec(args.config)
    cfg = RunConfig(methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()),
                    k_range=parse_k_range(args.k_range), norm=NormSpec.parse(args.norm), seed=args.seed,
                    solver=args.solver, delta=args.delta, num_samples=args.samples, subsample_size=args.size)
    fairlets = None
    if args.fairlets:
        mode, path = args.fairlets
        if mode != "external":
            raise DataError("usage: --fairlets external FILE")
        fairlets = load_fairlets(path)
        cfg = RunConfig(**{**cfg.__dict__, "methods": cfg.methods + ("external_fairlets",)})
    records = cmd_run(spec, cfg, threads=args.threads, fairlets=fairlets)
    _emit(args, "results.csv", records_csv(records))
    _emit(args, "timings.csv", timings_csv(records))
    _emit(args, "results.json", records_json(records))
    failed = sum(r["status"] != "ok" for r in records)
    if args.json:
        print(records_json(records))
    else:
        print(table_csv(cmd_table(records)), end="")
        print(f"# {len(records)} records, {failed} failed", file=sys.stderr)
    return 0


def do_table(args):
    records = read_records(Path(args.records).read_text(encoding="utf-8"))
    rows = cmd_table(records, parse_buckets(args.buckets), args.field)
    _emit(args, "table.csv", table_csv(rows))
    _emit(args, "table.json", table_json(rows, args.field))
    print(table_json(rows, args.field) if args.json else table_csv(rows), end="\n" if args.json else "")
    return 0


def do_emd(args):
    norm = NormSpec.parse(args.norm)
    method = "greedy" if args.greedy else "exact"
    if args.other is not None:
        a, _ = _read_points(args.config)
        b, _ = _read_points(args.other)
        if len(a) != len(b):
            raise DataError(f"EMD needs equal-size point sets, got {len(a)} and {len(b)}")
        ds = ColoredDataset(points=np.vstack([a, b]), colors=[0] * len(a) + [1] * len(b))
        value = emd(ds, 0, 1, norm, method)
        print(json.dumps({"emd": value, "method": method, "norm": str(norm)}) if args.json else repr(value))
        return 0
    spec = load_spec(args.config)
    feats, colors, names = prepare(spec)
    ds = balanced_subsample(feats, colors, spec.subsample_size, derive_seed(derive_seed(args.seed, args.sample), 0),
                            num_colors=spec.num_colors)
    table = pairwise_emd_table(ds, norm, method)
    if args.json:
        print(json.dumps({"colors": names, "method": method, "norm": str(norm), "emd": table.values.tolist()}))
    else:
        for row in table.values:
            print(",".join(repr(float(v)) for v in row))
    _emit(args, "emd.csv", "\n".join(",".join(repr(float(v)) for v in row) for row in table.values) + "\n")
    return 0


def do_oracle(args):
    pts, colors = _read_points(args.config, color_column="color")
    ds = ColoredDataset(points=pts, colors=colors)
    best = brute_fair_opt(ds, args.k, NormSpec.parse(args.norm), centers=args.centers)
    out = {"cost": best.cost, "assignment": best.assignment.tolist(),
           "centers": best.center_set.indices.tolist() if best.center_set.indices is not None else None}
    print(json.dumps(out) if args.json else f"cost {best.cost!r}\nassignment {out['assignment']}")
    return 0


def do_certify(args):
    colors = tuple(int(c) for c in args.colors.split(","))
    cert = certify(args.trials, args.seed, colors=colors, max_n=args.max_n, max_k=args.max_k)
    rep = cert.report()
    if args.json:
        print(json.dumps(rep))
    else:
        for m, bound in rep["bounds"].items():
            print(f"{m}: max ratio {rep['max_ratio'][m]:.4f} (bound {bound:g}), violations {rep['violations'][m]}")
    _emit(args, "certificate.json", json.dumps(rep, indent=1))
    return 0 if cert.ok else 1


COMMANDS = {"run": do_run, "table": do_table, "emd": do_emd, "oracle": do_oracle, "certify": do_certify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FairClusteringError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
