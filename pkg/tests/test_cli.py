"""CLI surface: exit codes, artifacts on disk, flag plumbing."""

from __future__ import annotations

import csv
import json
import socket

import pytest

from editsearch.cli import EXIT_BACKEND, EXIT_CONFIG, EXIT_ENTRY_FAILED, EXIT_OK, main
from editsearch.config import config_digest, derive_config
from editsearch.serialize import read_document

from conftest import make_task


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def manifest(tmp_path):
    path = tmp_path / "manifest.json"
    code = run_cli(
        "gen-manifest", "--count", 4, "--complexity", 2, "--seed", 1, "--out", path
    )
    assert code == EXIT_OK
    return path


class TestRun:
    def test_sim_run_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run_cli("run", "--complexity", 2, "--seed", 3, "--out", out)
        assert code == EXIT_OK
        topology, digest = read_document(out / "topology.json")
        assert topology.size >= 1
        assert digest == config_digest(derive_config(2, "main"))
        summary = json.load(open(out / "summary.json"))
        assert set(summary) >= {
            "run_id",
            "termination",
            "final_states",
            "size",
            "best_vqa",
            "best_clip",
        }
        assert summary["run_id"] == topology.run_id
        assert "run " in capsys.readouterr().out

    def test_missing_complexity(self, tmp_path):
        assert run_cli("run", "--out", tmp_path) == EXIT_CONFIG

    def test_invalid_complexity(self, tmp_path):
        assert run_cli("run", "--complexity", 0, "--out", tmp_path) == EXIT_CONFIG

    def test_task_file_sets_complexity(self, tmp_path):
        task = make_task(3, 8)
        task_path = tmp_path / "task.json"
        json.dump(task.to_doc(), open(task_path, "w"))
        out = tmp_path / "out"
        code = run_cli("run", "--task", task_path, "--out", out)
        assert code == EXIT_OK
        _, digest = read_document(out / "topology.json")
        assert digest == config_digest(derive_config(3, "main"))

    def test_flag_overrides_cap_budget(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli(
            "run", "--complexity", 2, "--preset", "resampling_only",
            "--max-steps", 2, "--out", out,
        )
        assert code == EXIT_OK
        topology, _ = read_document(out / "topology.json")
        assert topology.size <= 2

    def test_set_pairs_override(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli(
            "run", "--complexity", 2, "--preset", "resampling_only",
            "--set", "max_steps=2", "--out", out,
        )
        assert code == EXIT_OK
        topology, _ = read_document(out / "topology.json")
        assert topology.size <= 2

    def test_unknown_set_key(self, tmp_path):
        code = run_cli(
            "run", "--complexity", 2, "--set", "warp_speed=9", "--out", tmp_path
        )
        assert code == EXIT_CONFIG

    def test_malformed_set_pair(self, tmp_path):
        code = run_cli("run", "--complexity", 2, "--set", "maxsteps", "--out", tmp_path)
        assert code == EXIT_CONFIG

    def test_config_file_run_section(self, tmp_path):
        config = tmp_path / "config.json"
        json.dump({"run": {"max_steps": 2}}, open(config, "w"))
        out = tmp_path / "out"
        code = run_cli(
            "run", "--complexity", 2, "--preset", "resampling_only",
            "--config", config, "--out", out,
        )
        assert code == EXIT_OK
        topology, _ = read_document(out / "topology.json")
        assert topology.size <= 2

    def test_config_file_missing(self, tmp_path):
        code = run_cli(
            "run", "--complexity", 2, "--config", tmp_path / "nope.json",
            "--out", tmp_path,
        )
        assert code == EXIT_CONFIG

    def test_config_file_bad_json(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text("{nope")
        code = run_cli(
            "run", "--complexity", 2, "--config", config, "--out", tmp_path
        )
        assert code == EXIT_CONFIG

    def test_image_run_needs_instruction(self, tmp_path):
        image = tmp_path / "input.png"
        image.write_bytes(b"png")
        code = run_cli(
            "run", "--image", image, "--complexity", 2, "--out", tmp_path
        )
        assert code == EXIT_CONFIG

    def test_image_run_needs_endpoints(self, tmp_path):
        image = tmp_path / "input.png"
        image.write_bytes(b"png")
        config = tmp_path / "config.json"
        json.dump({}, open(config, "w"))
        code = run_cli(
            "run", "--image", image, "--complexity", 2,
            "--instruction", "add a hat", "--config", config, "--out", tmp_path,
        )
        assert code == EXIT_CONFIG

    def test_unreachable_backend_exits_3(self, tmp_path):
        probe = socket.socket()
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
        probe.close()
        base = f"http://127.0.0.1:{port}"
        endpoint = {"base_url": base, "max_retries": 0, "timeout_s": 1.0}
        config = tmp_path / "config.json"
        json.dump(
            {"endpoints": {"chat": endpoint, "actor": endpoint, "embed": endpoint}},
            open(config, "w"),
        )
        image = tmp_path / "input.png"
        image.write_bytes(b"png")
        code = run_cli(
            "run", "--image", image, "--complexity", 2,
            "--instruction", "add a hat", "--config", config, "--out", tmp_path,
        )
        assert code == EXIT_BACKEND


class TestGenManifest:
    def test_writes_tasks(self, manifest):
        doc = json.load(open(manifest))
        assert len(doc["tasks"]) == 4


class TestBench:
    def test_artifacts_without_figures(self, manifest, tmp_path, capsys):
        out = tmp_path / "bench"
        code = run_cli(
            "bench", "--manifest", manifest, "--preset", "tree_only",
            "--out", out, "--no-figures", "--seed", 2,
        )
        assert code == EXIT_OK
        entries = list(csv.DictReader(open(out / "bench_entries.csv")))
        assert len(entries) == 4
        assert (out / "bench_aggregates.csv").is_file()
        assert (out / "pairs_manifest.json").is_file()
        assert len(list((out / "topologies").glob("*.json"))) == 4
        assert not (out / "bench.png").exists()
        assert "C=2:" in capsys.readouterr().out

    def test_figure_rendered_by_default(self, manifest, tmp_path):
        out = tmp_path / "bench"
        code = run_cli(
            "bench", "--manifest", manifest, "--out", out, "--no-persist", "--seed", 2
        )
        assert code == EXIT_OK
        assert (out / "bench.png").stat().st_size > 0

    def test_missing_manifest(self, tmp_path):
        code = run_cli("bench", "--manifest", tmp_path / "nope.json", "--out", tmp_path)
        assert code == EXIT_ENTRY_FAILED or code == EXIT_CONFIG


class TestAblate:
    def test_summary_table_and_figure(self, tmp_path, capsys):
        manifest = tmp_path / "m.json"
        assert run_cli(
            "gen-manifest", "--count", 2, "--complexity", 2, "--seed", 4,
            "--out", manifest,
        ) == EXIT_OK
        out = tmp_path / "ablate"
        code = run_cli("ablate", "--manifest", manifest, "--out", out, "--seed", 2)
        assert code == EXIT_OK
        table = list(csv.DictReader(open(out / "ablate_summary.csv")))
        assert [row["policy"] for row in table] == [
            "direct", "resampling_only", "chain_only", "tree_only", "full",
        ]
        assert (out / "ablation.png").stat().st_size > 0
        stdout = capsys.readouterr().out
        for policy in ("direct", "full"):
            assert policy in stdout


class TestFit:
    def write_points(self, path, header=("complexity", "mean_size")):
        rows = [(1, 2.39), (2, 3.84), (3, 4.76), (4, 6.51), (5, 7.33), (6, 8.89), (7, 10.04)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)

    def test_fit_json_and_figure(self, tmp_path):
        points = tmp_path / "points.csv"
        self.write_points(points)
        out = tmp_path / "fit"
        assert run_cli("fit", "--points", points, "--out", out) == EXIT_OK
        doc = json.load(open(out / "fit.json"))
        assert doc["slope"] == pytest.approx(1.2721428571, abs=1e-6)
        assert doc["bias"] == pytest.approx(1.1628571429, abs=1e-6)
        assert not doc["degenerate"]
        assert (out / "fit.png").stat().st_size > 0

    def test_alternate_headers(self, tmp_path):
        points = tmp_path / "points.csv"
        self.write_points(points, header=("C", "size"))
        out = tmp_path / "fit"
        assert run_cli("fit", "--points", points, "--out", out, "--no-figures") == EXIT_OK

    def test_missing_columns(self, tmp_path):
        points = tmp_path / "points.csv"
        self.write_points(points, header=("x", "y"))
        code = run_cli("fit", "--points", points, "--out", tmp_path, "--no-figures")
        assert code == EXIT_CONFIG

    def test_degenerate_points_fail_run(self, tmp_path):
        points = tmp_path / "points.csv"
        with open(points, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("complexity", "mean_size"))
            writer.writerow((1, 2.0))
        code = run_cli("fit", "--points", points, "--out", tmp_path, "--no-figures")
        assert code == EXIT_ENTRY_FAILED


class TestReport:
    @pytest.fixture
    def topologies(self, manifest, tmp_path):
        out = tmp_path / "bench"
        assert run_cli(
            "bench", "--manifest", manifest, "--preset", "tree_only",
            "--out", out, "--no-figures", "--seed", 2,
        ) == EXIT_OK
        return out / "topologies"

    def test_steps_mode(self, topologies, tmp_path):
        out = tmp_path / "report"
        code = run_cli(
            "report", "--topologies", topologies, "--mode", "steps", "--out", out
        )
        assert code == EXIT_OK
        rows = list(csv.DictReader(open(out / "scaling_steps.csv")))
        assert rows
        assert set(rows[0]) == {"run_id", "n", "best_vqa", "best_clip"}
        assert (out / "scaling_steps.png").stat().st_size > 0

    def test_depth_mode(self, topologies, tmp_path):
        out = tmp_path / "report"
        code = run_cli(
            "report", "--topologies", topologies, "--mode", "depth",
            "--out", out, "--no-figures",
        )
        assert code == EXIT_OK
        rows = list(csv.DictReader(open(out / "scaling_depth.csv")))
        assert [int(row["depth"]) for row in rows] == sorted(
            int(row["depth"]) for row in rows
        )

    def test_empty_directory(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        code = run_cli("report", "--topologies", empty, "--out", tmp_path)
        assert code == EXIT_CONFIG
