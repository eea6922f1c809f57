import json

import pytest

from mublab.harness import cli, config as config_mod, report, runner
from mublab.harness.config import ConfigError, config_hash, load_config, task_seed

SMALL = {
    "seed": 3,
    "qaoa": {"families": ["maxcut", "mis"], "sizes": [4], "depths": [1], "n_seeds": 2,
             "bootstrap": 200, "method": {"max_evals": 60, "screen_budget": 10, "max_rounds": 1}},
    "qrao": {"sizes": [6], "depths": [1], "n_seeds": 2, "method": {"max_evals": 60, "restarts": 1}},
    "width": {"n_samples": 2000, "gap_n": [1]},
}


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL))
    return path


class TestConfig:
    def test_defaults_valid(self):
        cfg = load_config()
        assert cfg["qaoa"]["sizes"] == [6, 8] and cfg["workers"] == 1

    def test_full_grid(self):
        cfg = load_config(full=True)
        assert len(runner.qrao_tasks(cfg)) == 4 * 3 * 30
        assert len(runner.qaoa_tasks(cfg)) == 5 * 4 * 3 * 25

    def test_default_task_counts(self):
        cfg = load_config()
        assert len(runner.qaoa_tasks(cfg)) == 100
        tasks = runner.qrao_tasks(cfg)
        assert len(tasks) == 20 and sum(len(t["strategies"]) for t in tasks) == 80

    def test_unknown_key_rejected(self, tmp_path):
        for doc in ({"bogus": 1}, {"qaoa": {"sizes": [6], "nope": 2}}):
            path = tmp_path / "bad.json"
            path.write_text(json.dumps(doc))
            with pytest.raises(ConfigError):
                load_config(path)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_method_override_checked(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"qaoa": {"method": {"max_evals": 5}}}))
        assert load_config(path)["qaoa"]["method"]["max_evals"] == 5

    def test_hash_ignores_scheduling(self):
        a = load_config(workers=1, out="x")
        b = load_config(workers=4, out="y")
        assert config_hash(a) == config_hash(b)
        assert config_hash(a, "qaoa") != config_hash(load_config(seed=1), "qaoa")
        assert len(config_hash(a)) == 16

    def test_task_seed(self):
        assert task_seed(0, "qaoa", 1) == task_seed(0, "qaoa", 1)
        assert task_seed(0, "qaoa", 1) != task_seed(1, "qaoa", 1)
        assert 0 <= task_seed(5, "x") < 2 ** 32

    def test_schema_strict_everywhere(self):
        def walk(node):
            if node.get("type") == "object":
                assert node.get("additionalProperties") is False or "properties" not in node
                for child in node.get("properties", {}).values():
                    walk(child)
        walk(config_mod.schema())


class TestCli:
    def test_mub_verify(self, tmp_path, capsys):
        assert cli.main(["mub-verify", "--out", str(tmp_path)]) == 0
        doc = json.loads((tmp_path / "mub_verify.json").read_text())
        assert doc["passed"] and len(doc["results"]) == 8
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert "mub-verify" in manifest["runs"]

    def test_unsupported_dimension(self, tmp_path):
        assert cli.main(["mub-verify", "--dim", "6", "--out", str(tmp_path)]) == 2

    def test_gap_range(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"width": {"gap_n": [5], "n_samples": 1000}}))
        assert cli.main(["width", "gap", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_negative_seed(self, tmp_path):
        assert cli.main(["mub-verify", "--seed", "-1", "--out", str(tmp_path)]) == 2

    def test_width_radial(self, tmp_path, small_cfg):
        assert cli.main(["width", "radial", "--config", str(small_cfg), "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "width_radial.json").read_text())["passed"]


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    cfg = out / "cfg.json"
    cfg.write_text(json.dumps(SMALL))
    assert cli.main(["qaoa-bench", "--config", str(cfg), "--out", str(out)]) == 0
    assert cli.main(["qrao-bench", "--config", str(cfg), "--out", str(out), "--exhaustive"]) == 0
    return out, cfg


class TestBenches:
    def test_outputs(self, bench_dir):
        out, _ = bench_dir
        rows = runner.read_csv(out / runner.QAOA_CSV)
        assert len(rows) == 2 * 2 * 2
        assert list(rows[0])[:len(runner.QAOA_COLUMNS)] == list(runner.QAOA_COLUMNS)
        qr = runner.read_csv(out / runner.QRAO_CSV)
        assert {r["strategy"] for r in qr} == {"x_variational", "mub_r1_b0", "two_pole",
                                               "bitflip_2pole", "exhaustive_oracle"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert set(manifest["runs"]) >= {"qaoa-bench", "qrao-bench"}
        assert len(manifest["runs"]["qaoa-bench"]["task_seeds"]) == 4

    def test_rerun_resumes_identically(self, bench_dir, capsys):
        out, cfg = bench_dir
        before = runner.csv_body(out / runner.QAOA_CSV)
        assert cli.main(["qaoa-bench", "--config", str(cfg), "--out", str(out)]) == 0
        assert runner.csv_body(out / runner.QAOA_CSV) == before
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["runs"]["qaoa-bench"]["resumed_tasks"] == 4

    def test_fresh_run_matches(self, bench_dir, tmp_path):
        out, cfg = bench_dir
        assert cli.main(["qrao-bench", "--config", str(cfg), "--out", str(tmp_path),
                         "--exhaustive", "--workers", "2"]) == 0
        assert runner.csv_body(tmp_path / runner.QRAO_CSV) == runner.csv_body(out / runner.QRAO_CSV)

    def test_stale_partial_ignored(self, bench_dir, tmp_path):
        _, cfg = bench_dir
        cfgd = load_config(cfg)
        task = runner.qaoa_tasks(cfgd)[0]
        runner.PartialStore(tmp_path, "qaoa", "other-hash").save(task, [{"junk": 1}])
        rows, _, chash, resumed, _ = runner.qaoa_bench(cfgd, tmp_path)
        assert resumed == 0 and "junk" not in rows[0]
        # same hash but a different task description is also recomputed
        runner.PartialStore(tmp_path, "qaoa", chash).save({**task, "p": 9}, [{"junk": 1}])
        rows, _, _, resumed, _ = runner.qaoa_bench(cfgd, tmp_path)
        assert resumed == 3 and "junk" not in rows[0]

    def test_report(self, bench_dir):
        out, cfg = bench_dir
        assert cli.main(["report", str(out), "--config", str(cfg)]) == 0
        for name in ("qaoa_summary.json", "qrao_summary.json", "summary_tables.md",
                     "qaoa_facets.csv", "qrao_facets.csv"):
            assert (out / name).exists()
        summ = json.loads((out / "qrao_summary.json").read_text())
        assert summ["checks"]["passed"] and summ["checks"]["cells_with_oracle"] == 2
        gd = summ["gain_decomposition"]
        assert gd["cells"] == 2
        assert gd["prescreen"] + gd["poles"] + gd["local_search"] == pytest.approx(gd["total"])
        assert gd["poles"] >= 0 and gd["local_search"] >= 0


def _synthetic_qaoa(tmp_path, hashes=("h",), drop=None):
    rows = []
    for k, (std, adp) in enumerate([(0.5, 0.6), (0.7, 0.7), (0.9, 0.7)]):
        for method, val in (("standard", std), ("adaptive_mub_xrot", adp)):
            rows.append({"family": "mis", "instance_seed": k, "n": 6, "p": 1, "method": method,
                         "decoded_ratio": val, "postselected_ratio": val, "energy": -1.0,
                         "runtime_s": 1.0 if method == "standard" else 2.0, "n_cost_evals": 5,
                         "final_family_r": "", "seed": 9, "decoded_bitstring": 0,
                         "config_hash": hashes[k % len(hashes)]})
    cols = [c for c in runner.QAOA_COLUMNS + ("config_hash",) if c != drop]
    runner.write_csv(tmp_path / runner.QAOA_CSV, cols, rows)


class TestReport:
    def test_synthetic(self, tmp_path):
        _synthetic_qaoa(tmp_path)
        out = report.build_report(tmp_path, 0, 500)["qaoa"]
        mis = out["by_family"]["mis"]
        assert mis["win_tie_loss"] == "1/1/1"
        assert mis["mean_delta"] == pytest.approx(-0.1 / 3)
        assert mis["median_runtime_ratio"] == pytest.approx(2.0)
        assert out["mis_directional_check"]["red_flag"]
        assert "RED FLAG" in (tmp_path / "summary_tables.md").read_text()

    def test_mixed_hash(self, tmp_path):
        _synthetic_qaoa(tmp_path, hashes=("a", "b"))
        with pytest.raises(report.MixedConfigError):
            report.build_report(tmp_path, 0, 100)
        assert cli.main(["report", str(tmp_path)]) == 2

    def test_missing_column(self, tmp_path):
        _synthetic_qaoa(tmp_path, drop="energy")
        with pytest.raises(report.ResultSchemaError):
            report.build_report(tmp_path, 0, 100)

    def test_empty_dir(self, tmp_path):
        assert cli.main(["report", str(tmp_path)]) == 2

    def test_csv_body_masks_runtime(self, tmp_path):
        p = tmp_path / "a.csv"
        runner.write_csv(p, ["x", "runtime_s"], [{"x": 1.5, "runtime_s": 0.123}])
        assert runner.csv_body(p) == "x,runtime_s\n1.5,\n"
