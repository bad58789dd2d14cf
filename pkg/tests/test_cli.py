import json

import pytest

from fairkclust.cli import main


@pytest.fixture
def toy_spec(tmp_path):
    path = tmp_path / "toy.yaml"
    path.write_text("name: toy\nsynthetic: {colors: 2, rows_per_color: 20, dim: 2, components: 3, seed: 1}\n"
                    "subsample_size: 10\nnum_samples: 2\n")
    return path


def write(path, text):
    path.write_text(text)
    return str(path)


class TestEmd:
    def test_identical_files(self, tmp_path, capsys):
        a = write(tmp_path / "a.csv", "x,y\n0,1\n2,3\n")
        assert main(["emd", a, a]) == 0
        assert float(capsys.readouterr().out) == 0

    def test_line_example(self, tmp_path, capsys):
        a = write(tmp_path / "a.csv", "x\n0\n10\n")
        b = write(tmp_path / "b.csv", "x\n1\n9\n")
        assert main(["emd", a, b, "--norm", "1,1", "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["emd"] == 2

    def test_unequal_sizes(self, tmp_path, capsys):
        a = write(tmp_path / "a.csv", "x\n0\n10\n")
        b = write(tmp_path / "b.csv", "x\n1\n")
        assert main(["emd", a, b]) == 2
        assert "equal-size" in capsys.readouterr().err

    def test_spec_table_symmetric(self, toy_spec, capsys):
        assert main(["emd", str(toy_spec), "--json"]) == 0
        table = json.loads(capsys.readouterr().out)["emd"]
        assert table[0][1] == table[1][0] and table[0][0] == 0


class TestOracle:
    def test_hand_instance(self, tmp_path, capsys):
        pts = write(tmp_path / "p.csv", "x,color\n0,a\n10,a\n1,b\n11,b\n")
        assert main(["oracle", pts, "--k", "1", "--norm", "1,1", "--json"]) == 0
        assert json.loads(capsys.readouterr().out)["cost"] == 20


class TestRunAndTable:
    def test_run_then_table(self, toy_spec, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", str(toy_spec), "--k", "2-3", "--out", str(out)]) == 0
        capsys.readouterr()
        for name in ("results.csv", "timings.csv", "results.json"):
            assert (out / name).exists()
        assert "wall_time_ms" not in (out / "results.csv").read_text()
        assert main(["table", str(out / "results.csv"), "--json"]) == 0
        rows = json.loads(capsys.readouterr().out)["rows"]
        assert {r["method"] for r in rows} >= {"algorithm1", "variant_q", "kmedian++"}

    def test_global_flags_after_subcommand(self, toy_spec, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["--seed", "5", "run", str(toy_spec), "--k", "2", "--out", str(a)])
        main(["run", str(toy_spec), "--k", "2", "--seed", "5", "--out", str(b)])
        assert (a / "results.csv").read_text() == (b / "results.csv").read_text()

    def test_external_fairlets(self, toy_spec, tmp_path, capsys):
        fl = write(tmp_path / "fl.txt", "\n".join(str(i % 5) for i in range(10)) + "\n")
        assert main(["run", str(toy_spec), "--k", "2", "--methods", "algorithm1", "--fairlets", "external", fl,
                     "--json"]) == 0
        methods = {r["method"] for r in json.loads(capsys.readouterr().out)}
        assert methods == {"algorithm1", "external_fairlets"}

    def test_bad_method(self, toy_spec, capsys):
        assert main(["run", str(toy_spec), "--methods", "nope"]) == 2


class TestCertify:
    def test_small_run_passes(self, capsys):
        assert main(["certify", "--trials", "30", "--json"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["ok"] and rep["trials"] == 30

    def test_one_color_ratio_one(self, capsys):
        assert main(["certify", "--trials", "20", "--colors", "1", "--json"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["max_ratio"]["algorithm1"] == pytest.approx(1.0)
        assert rep["max_ratio"]["variant_q"] == pytest.approx(1.0)

    def test_replay(self, capsys):
        main(["certify", "--trials", "10", "--seed", "3", "--json"])
        first = capsys.readouterr().out
        main(["certify", "--trials", "10", "--seed", "3", "--json"])
        assert capsys.readouterr().out == first

    def test_exit_code_on_violation(self, monkeypatch, capsys):
        import fairkclust.certify as cert
        monkeypatch.setitem(cert.BOUNDS, "variant_q", 0.5)
        assert main(["certify", "--trials", "5", "--colors", "2"]) == 1
