import json

import numpy as np
import pytest

from geocl import cli
from geocl.cli import RunConfig, main, run_pipeline
from geocl.datasets import toy_dataset_path
from geocl.graph import graph_paths, read_graph_csv

TOY = str(toy_dataset_path())


def toy_config(tmp_path, **kw):
    base = dict(synapses=TOY, replicates=10, seed=3, output=str(tmp_path / "out"))
    base.update(kw)
    return RunConfig(**base)


class TestRunConfig:
    def test_replicates_zero_is_config_error(self, tmp_path):
        with pytest.raises(cli.ConfigError):
            toy_config(tmp_path, replicates=0).validate()
        assert main(["run", "--synapses", TOY, "--replicates", "0", "-o", str(tmp_path)]) == 2

    def test_missing_input(self, tmp_path):
        assert main(["run", "--synapses", str(tmp_path / "nope.csv"), "-o", str(tmp_path)]) == 2

    def test_exactly_one_input(self, tmp_path):
        with pytest.raises(cli.ConfigError):
            RunConfig(output=str(tmp_path)).validate()

    def test_hash_tracks_semantic_fields_only(self, tmp_path):
        a = toy_config(tmp_path)
        assert a.config_hash() == toy_config(tmp_path, output="/elsewhere", workers=8).config_hash()
        assert a.config_hash() == toy_config(tmp_path, baselines=["inverse-power", "chung-lu"]).config_hash()
        # trim only matters for custom variants
        assert a.config_hash() == toy_config(tmp_path, trim=5).config_hash()
        for change in (dict(seed=4), dict(replicates=11), dict(grid_size=100), dict(variant="full-1"),
                       dict(permute=False), dict(baselines=[]), dict(convention="unordered")):
            assert toy_config(tmp_path, **change).config_hash() != a.config_hash(), change
        assert (toy_config(tmp_path, variant="custom", trim=1).config_hash()
                != toy_config(tmp_path, variant="custom", trim=2).config_hash())

    def test_json_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"synapses": TOY, "replicates": 4, "output": str(tmp_path / "o")}))
        cfg = RunConfig.from_json(path)
        assert cfg.replicates == 4
        path.write_text(json.dumps({"bogus": 1}))
        assert main(["run", "--config", str(path)]) == 2


class TestPipeline:
    def test_toy_run_completes_fast(self, tmp_path):
        import time
        t0 = time.perf_counter()
        manifest = run_pipeline(toy_config(tmp_path))
        assert time.perf_counter() - t0 < 5.0
        out = tmp_path / "out"
        assert manifest["complete"]
        for name in ("fit.json", "intensities.csv", "stats.csv", "summary.json", "comparison.txt",
                     "manifest.json", "spectrum_histogram.csv", "rank_closeness.csv",
                     "baselines/baseline_report.json", "sims/sim_9.edges.csv"):
            assert (out / name).exists(), name
        on_disk = json.loads((out / "manifest.json").read_text())
        assert on_disk["config_hash"] == toy_config(tmp_path).config_hash()
        assert len(on_disk["replicate_seeds"]) == 10
        assert all(s["status"] == "ok" for s in on_disk["stages"].values())

    def test_simulations_pass_trace_identities(self, tmp_path):
        from geocl import metrics
        run_pipeline(toy_config(tmp_path))
        g = read_graph_csv(*graph_paths(tmp_path / "out" / "reference"))
        for s in cli.load_simulations(g, tmp_path / "out" / "sims"):
            lam = metrics.adjacency_spectrum(s)
            assert abs(lam.sum() - s.num_loops) <= 1e-6 * s.n
            assert abs((lam ** 4).sum() - metrics.closed_4_walks(s)) <= 1e-6 * max(metrics.closed_4_walks(s), 1)

    def test_byte_identical_stats(self, tmp_path):
        run_pipeline(toy_config(tmp_path / "a"))
        run_pipeline(toy_config(tmp_path / "b", workers=3))
        a = (tmp_path / "a" / "out" / "stats.csv").read_bytes()
        b = (tmp_path / "b" / "out" / "stats.csv").read_bytes()
        assert a == b

    def test_failed_stage_marks_manifest(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise cli.FitError("synthetic failure")
        monkeypatch.setattr(cli, "stage_fit", boom)
        code = main(["run", "--synapses", TOY, "--replicates", "2", "-o", str(tmp_path / "o")])
        assert code == 4
        m = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert m["complete"] is False
        assert m["stages"]["ingest"]["status"] == "ok"
        assert m["stages"]["fit"]["status"] == "failed"
        assert "synthetic failure" in m["stages"]["fit"]["error"]

    def test_stage_tagged_diagnostic(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("pre_id\n")
        assert main(["run", "--synapses", str(bad), "-o", str(tmp_path / "o")]) == 3
        assert "[ingest]" in capsys.readouterr().err


class TestSubcommands:
    def test_staged_reruns(self, tmp_path, capsys):
        d = tmp_path
        assert main(["ingest", "--synapses", TOY, "--out", str(d / "g")]) == 0
        ref = str(d / "g" / "named-2")
        assert main(["fit", "--graph", ref, "--out", str(d / "fit")]) == 0
        assert main(["generate", "--graph", ref, "--fit", str(d / "fit" / "fit.json"),
                     "--out", str(d / "sims"), "--replicates", "4", "--seed", "1"]) == 0
        assert main(["stats", "--graph", ref, "--sims", str(d / "sims"), "--out", str(d / "st")]) == 0
        assert main(["compare", "--stats", str(d / "st" / "stats.csv"),
                     "--reference", str(d / "st" / "reference_stats.csv"), "--out", str(d / "cmp")]) == 0
        assert "Number of Edges" in capsys.readouterr().out
        summary = json.loads((d / "cmp" / "summary.json").read_text())
        assert summary["replicates"] == 4
        assert main(["baseline", "--graph", ref, "--fit", str(d / "fit" / "fit.json"),
                     "--out", str(d / "bl"), "--replicates", "3", "--weights", "rho"]) == 0
        report = json.loads((d / "bl" / "baseline_report.json").read_text())
        models = [r["model"] for r in report["rows"]]
        assert models.count("chung-lu") == 3 and "inverse-power" in models

    def test_generate_matches_pipeline(self, tmp_path):
        run_pipeline(toy_config(tmp_path, baselines=[]))
        out = tmp_path / "out"
        assert main(["generate", "--graph", str(out / "reference"), "--fit", str(out / "fit.json"),
                     "--out", str(tmp_path / "again"), "--replicates", "10", "--seed", "3"]) == 0
        for r in range(10):
            assert ((tmp_path / "again" / f"sim_{r}.edges.csv").read_bytes()
                    == (out / "sims" / f"sim_{r}.edges.csv").read_bytes())

    def test_sandbox(self, tmp_path, capsys):
        assert main(["sandbox", "--n", "100", "--replicates", "20", "--out", str(tmp_path / "s.json")]) == 0
        rep = json.loads((tmp_path / "s.json").read_text())
        assert [c["rho"] for c in rep["classes"]] == [2.0, 5.0, 10.0, 20.0]
        assert main(["sandbox", "--replicates", "1"]) == 2

    def test_data_error_exit_code(self, tmp_path):
        assert main(["stats", "--graph", str(tmp_path / "missing"), "--sims", str(tmp_path),
                     "--out", str(tmp_path / "o")]) == 3
