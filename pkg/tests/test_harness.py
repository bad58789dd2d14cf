import json
import math
import random

import numpy as np
import pytest

import fairkclust.harness as harness
from fairkclust.data import spec_from_mapping
from fairkclust.errors import DataError
from fairkclust.harness import (FAIR_METHODS, RunConfig, cmd_run, cmd_table, parse_buckets, parse_k_range,
                                read_records, records_csv, records_json, table_csv)

SIX = ("kmedian++", "algorithm1", "variant_q", "variant_excellent", "algorithm2", "fair_kcenter")


def small_spec(colors=4, rows=30, size=16, samples=2):
    return spec_from_mapping({"name": "toy", "synthetic": {"colors": colors, "rows_per_color": rows, "dim": 2,
                                                           "components": 4, "seed": 3},
                              "subsample_size": size, "num_samples": samples})


def rec(cost, k=3, method="algorithm1", sample=0):
    return {"dataset": "d", "sample_id": sample, "method": method, "k": k, "cost": cost, "status": "ok"}


class TestRun:
    def test_record_count(self):
        cfg = RunConfig(methods=SIX, k_range=tuple(range(2, 21)))
        records = cmd_run(small_spec(samples=3), cfg)
        assert len(records) == 3 * 19 * 6

    def test_fair_records_balanced(self):
        records = cmd_run(small_spec(), RunConfig(k_range=(2, 3, 5)))
        fair = [r for r in records if r["method"] in FAIR_METHODS + ("fairlets",)]
        assert fair and all(r["balanced"] for r in fair)
        assert all(r["status"] == "ok" for r in records)

    def test_fairlets_row_constant_in_k(self):
        records = cmd_run(small_spec(samples=1), RunConfig(methods=("fairlets",), k_range=(2, 4, 6)))
        assert len({r["cost"] for r in records}) == 1

    def test_deterministic_csv(self):
        cfg = RunConfig(k_range=(2, 4))
        a = records_csv(cmd_run(small_spec(), cfg))
        b = records_csv(cmd_run(small_spec(), cfg))
        assert a == b

    def test_seed_changes_output(self):
        a = records_csv(cmd_run(small_spec(), RunConfig(k_range=(2,), seed=0)))
        b = records_csv(cmd_run(small_spec(), RunConfig(k_range=(2,), seed=1)))
        assert a != b

    def test_worker_pool_same_output(self):
        cfg = RunConfig(k_range=(2, 3))
        assert records_csv(cmd_run(small_spec(), cfg, threads=2)) == records_csv(cmd_run(small_spec(), cfg))

    def test_sample_failure_recorded(self, monkeypatch):
        original = harness.run_sample

        def flaky(name, dataset, sample_id, *args, **kw):
            if sample_id == 1:
                raise DataError("boom")
            return original(name, dataset, sample_id, *args, **kw)

        monkeypatch.setattr(harness, "run_sample", flaky)
        records = cmd_run(small_spec(samples=3), RunConfig(methods=("algorithm1",), k_range=(2,)))
        status = {r["sample_id"]: r["status"] for r in records}
        assert status[0] == "ok" and status[2] == "ok" and status[1].startswith("failed: DataError")

    def test_spec_error_fails_fast(self, tmp_path):
        spec = spec_from_mapping({"path": "nope.csv", "features": ["a"], "protected": [{"column": "b", "in": [1]}]},
                                 base=tmp_path)
        with pytest.raises(DataError):
            cmd_run(spec, RunConfig())

    def test_external_fairlets(self):
        # pair consecutive colors' points: fairlet s holds point s of every color
        spec = small_spec(colors=2, size=8, samples=1)
        fairlets = {None: np.array([0, 1, 2, 3, 0, 1, 2, 3])}
        records = cmd_run(spec, RunConfig(methods=("external_fairlets",), k_range=(2,)), fairlets=fairlets)
        assert records[0]["balanced"] and records[0]["status"] == "ok"


class TestTable:
    def test_single_record(self):
        (row,) = cmd_table([rec(7.5)])
        assert row["mean"] == 7.5 and row["std"] == 0

    def test_population_std(self):
        (row,) = cmd_table([rec(10.0), rec(20.0)])
        assert row["mean"] == 15 and row["std"] == 5

    def test_bucket_layout(self):
        rows = cmd_table([rec(1.0, k=k) for k in range(2, 21)])
        assert [r["bucket"] for r in rows] == ["2-5", "6-10", "11-20"]
        assert [r["count"] for r in rows] == [4, 5, 10]

    def test_custom_buckets(self):
        rows = cmd_table([rec(1.0, k=k) for k in range(1, 5)], parse_buckets("1-2,3-4"))
        assert [r["bucket"] for r in rows] == ["1-2", "3-4"]

    def test_empty(self):
        with pytest.raises(DataError):
            cmd_table([])

    def test_failed_rows_skipped(self):
        rows = cmd_table([rec(4.0), {**rec(math.nan), "status": "failed: x"}])
        assert rows[0]["count"] == 1

    def test_order_invariant(self):
        recs = [rec(float(v), k=2 + v % 19, sample=v) for v in range(60)]
        shuffled = recs[:]
        random.Random(4).shuffle(shuffled)
        assert table_csv(cmd_table(recs)) == table_csv(cmd_table(shuffled))


class TestEmission:
    def test_csv_round_trip(self):
        records = cmd_run(small_spec(samples=1), RunConfig(k_range=(2, 3)))
        text = records_csv(records)
        assert records_csv(read_records(text)) == text

    def test_json_matches_csv(self):
        records = cmd_run(small_spec(samples=1), RunConfig(methods=("algorithm1",), k_range=(2,)))
        parsed = json.loads(records_json(records))
        assert parsed[0]["cost"] == read_records(records_csv(records))[0]["cost"]
        assert "wall_time_ms" in parsed[0]

    def test_decimal_point(self):
        text = records_csv([{**rec(1234567.5), "balanced": True, "seed": 1}])
        assert "1234567.5" in text and "1,234" not in text

    def test_parse_k_range(self):
        assert parse_k_range("2-4,7") == (2, 3, 4, 7)
