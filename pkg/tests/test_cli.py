import csv
import io
import json
import os

import numpy as np
import pytest

from rrtcast import read_results, read_tree_file
from rrtcast.cli import main


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestGen:
    def test_urrt_roundtrip(self, tmp_path, capsys):
        out = tmp_path / "t.txt"
        code, _, _ = run_cli(
            ["gen", "--model", "urrt", "--n", "40", "--seed", "5", "--out", str(out)], capsys
        )
        assert code == 0
        tree = read_tree_file(out)
        assert tree.n == 40
        header = out.read_text().splitlines()[0]
        assert header.startswith("# model=urrt n=40")

    def test_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        for out in (a, b):
            run_cli(
                ["gen", "--model", "pa", "--n", "30", "--beta", "2.0", "--seed", "9", "--out", str(out)],
                capsys,
            )
        assert a.read_text() == b.read_text()

    def test_pa_requires_beta(self, tmp_path, capsys):
        code, _, err = run_cli(
            ["gen", "--model", "pa", "--n", "10", "--seed", "1", "--out", str(tmp_path / "x")],
            capsys,
        )
        assert code == 2
        assert "beta" in err


@pytest.fixture
def tree_file(tmp_path, capsys):
    out = tmp_path / "tree.txt"
    main(["gen", "--model", "urrt", "--n", "60", "--seed", "3", "--out", str(out)])
    capsys.readouterr()
    return out


class TestBroadcast:
    def test_writes_all_bits(self, tree_file, tmp_path, capsys):
        bits = tmp_path / "bits.txt"
        code, _, _ = run_cli(
            ["broadcast", "--tree", str(tree_file), "--q", "0.2", "--seed", "4", "--out", str(bits)],
            capsys,
        )
        assert code == 0
        lines = [l for l in bits.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) == 61
        assert all(l.split()[1] in ("+1", "-1") for l in lines)

    def test_leaves_only_masks_internal(self, tree_file, tmp_path, capsys):
        bits = tmp_path / "bits.txt"
        run_cli(
            [
                "broadcast", "--tree", str(tree_file), "--q", "0.2", "--seed", "4",
                "--out", str(bits), "--leaves-only",
            ],
            capsys,
        )
        tree = read_tree_file(tree_file)
        lines = [l for l in bits.read_text().splitlines() if not l.startswith("#")]
        listed = {int(l.split()[0]) for l in lines}
        assert listed == set(np.flatnonzero(tree.is_leaf).tolist())
        assert "visibility=leaves" in bits.read_text().splitlines()[0]


class TestStats:
    def test_sections(self, tree_file, capsys):
        code, out, _ = run_cli(["stats", "--tree", str(tree_file)], capsys)
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["section", "key", "value"]
        sections = {r[0] for r in rows[1:]}
        assert sections == {"centroid", "phi", "depth_histogram"}
        phi_rows = [r for r in rows if r[0] == "phi"]
        assert len(phi_rows) == 61


class TestRootPosterior:
    def test_normalized_output(self, tree_file, tmp_path, capsys):
        out = tmp_path / "post.csv"
        code, _, _ = run_cli(
            ["root-posterior", "--tree", str(tree_file), "--out", str(out)], capsys
        )
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 61
        total = sum(float(r["posterior"]) for r in rows)
        assert total == pytest.approx(1.0)


class TestEstimate:
    def test_majority_obvious(self, tmp_path, capsys):
        tree = tmp_path / "t.txt"
        tree.write_text("# model=manual n=2\n1 0\n2 0\n")
        bits = tmp_path / "b.txt"
        bits.write_text("0 +1\n1 +1\n2 -1\n")
        code, out, _ = run_cli(
            ["estimate", "--tree", str(tree), "--bits", str(bits), "--estimator", "majority", "--seed", "1"],
            capsys,
        )
        assert code == 0
        assert out.strip() == "+1"

    @pytest.mark.parametrize("estimator", ["centroid", "bayes", "structured"])
    def test_other_estimators_run(self, tree_file, tmp_path, capsys, estimator):
        bits = tmp_path / "b.txt"
        run_cli(
            ["broadcast", "--tree", str(tree_file), "--q", "0.1", "--seed", "2", "--out", str(bits)],
            capsys,
        )
        code, out, _ = run_cli(
            ["estimate", "--tree", str(tree_file), "--bits", str(bits), "--estimator", estimator, "--seed", "1"],
            capsys,
        )
        assert code == 0
        assert out.strip() in ("+1", "-1")

    def test_leaf_variant(self, tree_file, tmp_path, capsys):
        bits = tmp_path / "b.txt"
        run_cli(
            [
                "broadcast", "--tree", str(tree_file), "--q", "0.1", "--seed", "2",
                "--out", str(bits), "--leaves-only",
            ],
            capsys,
        )
        code, out, _ = run_cli(
            [
                "estimate", "--tree", str(tree_file), "--bits", str(bits),
                "--estimator", "centroid", "--leaves-only", "--seed", "1",
            ],
            capsys,
        )
        assert code == 0
        assert out.strip() in ("+1", "-1")


class TestMoments:
    def test_l10_row(self, capsys):
        code, out, _ = run_cli(
            ["moments", "--lemma", "l10", "--q", "0.1", "--i", "0", "--n", "100"], capsys
        )
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert len(rows) == 1
        assert float(rows[0]["lower"]) <= float(rows[0]["exact"]) <= float(rows[0]["upper"])

    def test_pa_without_beta_is_config_error(self, capsys):
        code, _, err = run_cli(
            ["moments", "--lemma", "pa1", "--q", "0.05", "--i", "0", "--n", "100"], capsys
        )
        assert code == 2
        assert "beta" in err

    def test_domain_violation(self, capsys):
        code, _, _ = run_cli(
            ["moments", "--lemma", "l14", "--q", "0.4", "--i", "0", "--n", "100"], capsys
        )
        assert code == 2


class TestExperiment:
    def write_config(self, tmp_path, **overrides):
        cfg = dict(
            model="urrt", n=30, q_grid=[0.0, 0.2], estimators=["majority"], trials=50, seed=11
        )
        cfg.update(overrides)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_csv_output(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "results.csv"
        code, _, _ = run_cli(["experiment", "--config", str(cfg), "--out", str(out)], capsys)
        assert code == 0
        results = read_results(out)
        assert len(results) == 2
        assert results[0].q == 0.0 and results[0].error_rate == 0.0

    def test_json_output(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "results.json"
        code, _, _ = run_cli(
            ["experiment", "--config", str(cfg), "--out", str(out), "--format", "json"], capsys
        )
        assert code == 0
        assert len(read_results(out, "json")) == 2

    def test_stdout_table(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        code, out, _ = run_cli(["experiment", "--config", str(cfg)], capsys)
        assert code == 0
        assert out.splitlines()[0] == "estimator,q,error_rate,ci_halfwidth"

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, model="mystery")
        code, _, err = run_cli(["experiment", "--config", str(cfg)], capsys)
        assert code == 2
        assert "config error" in err

    def test_env_seed_override(self, tmp_path, capsys, monkeypatch):
        cfg = self.write_config(tmp_path, q_grid=[0.3], trials=200)
        out1, out2, out3 = (tmp_path / f"r{i}.csv" for i in range(3))
        run_cli(["experiment", "--config", str(cfg), "--out", str(out1)], capsys)
        monkeypatch.setenv("RBL_SEED", "999")
        run_cli(["experiment", "--config", str(cfg), "--out", str(out2)], capsys)
        run_cli(["experiment", "--config", str(cfg), "--out", str(out3)], capsys)
        r1, r2, r3 = (read_results(p)[0] for p in (out1, out2, out3))
        assert r1.seed == 11 and r2.seed == 999
        assert r2 == r3
        assert r1.errors != r2.errors or r1.seed != r2.seed

    def test_threads_flag_same_results(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, trials=120)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run_cli(["experiment", "--config", str(cfg), "--out", str(out1)], capsys)
        run_cli(
            ["experiment", "--config", str(cfg), "--out", str(out2), "--threads", "3"], capsys
        )
        assert read_results(out1) == read_results(out2)
