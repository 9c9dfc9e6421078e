"""Benchmark and ablation drivers over the sim world."""

from __future__ import annotations

import csv
import json
from fractions import Fraction

import pytest

from editsearch.bench import (
    POLICIES,
    aggregate_by_complexity,
    bench,
    ablate,
    load_manifest,
    policy_config,
    run_policy,
    save_manifest,
    standard_manifest,
    summarize_policy,
)
from editsearch.serialize import read_document
from editsearch.simworld import SimActorParams

from conftest import make_params


class TestPolicyConfig:
    def test_direct_is_single_state(self):
        cfg = policy_config("direct", 4)
        assert cfg.max_steps == 1
        assert cfg.max_n_children == 1
        assert cfg.max_depth == 1
        assert cfg.search_range == 0
        assert cfg.thought_mode == "passthrough"

    @pytest.mark.parametrize("policy", POLICIES[1:])
    def test_non_direct_policies_match_presets(self, policy):
        from editsearch.config import derive_config

        assert policy_config(policy, 3) == derive_config(3, policy)


@pytest.fixture(scope="module")
def small_tasks():
    return standard_manifest(count=6, complexity=3, seed=7)


class TestRunPolicy:
    def test_rows_align_with_manifest(self, small_tasks):
        rows = run_policy(small_tasks, "direct", make_params(), seed=11)
        assert [r.index for r in rows] == list(range(len(small_tasks)))
        assert all(r.policy == "direct" for r in rows)
        assert all(r.complexity == 3 for r in rows)
        assert all(r.size == 1 for r in rows)
        assert all(r.steps_to_best == 1 for r in rows)

    def test_deterministic_given_seed(self, small_tasks):
        first = run_policy(small_tasks, "tree_only", make_params(), seed=11)
        second = run_policy(small_tasks, "tree_only", make_params(), seed=11)
        assert first == second

    def test_seed_changes_outcomes(self, small_tasks):
        base = run_policy(small_tasks, "resampling_only", make_params(p=0.5), seed=11)
        other = run_policy(small_tasks, "resampling_only", make_params(p=0.5), seed=12)
        assert base != other

    def test_persist_dir_round_trips(self, small_tasks, tmp_path):
        rows = run_policy(
            small_tasks[:2], "direct", make_params(), seed=3, persist_dir=tmp_path
        )
        files = sorted(tmp_path.glob("*.json"))
        assert [f.name for f in files] == ["direct_0000.json", "direct_0001.json"]
        topology, digest = read_document(files[0])
        assert topology.size == rows[0].size
        assert len(digest) == 64

    def test_actor_edit_limit_covers_complexity(self):
        # Passthrough instructions carry `complexity` edits; a lower per-call
        # limit would make every direct run fail on parse, not on chance.
        tasks = standard_manifest(count=4, complexity=6, seed=1)
        rows = run_policy(tasks, "direct", SimActorParams(p=1.0, q=0.0, k=2, seed=0), seed=5)
        assert all(r.final_vqa == 1 for r in rows)


class TestAggregation:
    def test_aggregate_by_complexity_groups_and_sorts(self):
        tasks_a = standard_manifest(count=3, complexity=2, seed=1)
        tasks_b = standard_manifest(count=3, complexity=4, seed=2)
        rows = run_policy(tasks_a + tasks_b, "direct", make_params(p=1.0, q=0.0), seed=9)
        aggregates = aggregate_by_complexity(rows)
        assert [a["complexity"] for a in aggregates] == [2, 4]
        assert all(a["count"] == 3 for a in aggregates)
        assert aggregates[0]["cif"] == "1"
        assert aggregates[0]["mean_size"] == pytest.approx(1.0)
        assert aggregates[0]["stderr_size"] == pytest.approx(0.0)

    def test_summary_recomputable_from_rows(self, small_tasks):
        rows = run_policy(small_tasks, "resampling_only", make_params(p=0.6), seed=4)
        summary = summarize_policy(rows)
        assert summary["count"] == len(rows)
        expected_mean_vqa = float(sum(r.final_vqa for r in rows) / len(rows))
        assert summary["mean_vqa"] == pytest.approx(expected_mean_vqa)
        hits = sum(1 for r in rows if r.final_vqa == 1)
        assert summary["cif"] == str(Fraction(hits, len(rows)))
        assert summary["cif_float"] == pytest.approx(hits / len(rows))


class TestBenchDriver:
    def test_bench_writes_artifacts(self, small_tasks, tmp_path):
        out = bench(small_tasks, "direct", make_params(), seed=2, out_dir=tmp_path)
        assert set(out) == {"rows", "aggregates"}
        entries = list(csv.DictReader(open(tmp_path / "bench_entries.csv")))
        assert len(entries) == len(small_tasks)
        assert entries[0]["policy"] == "direct"
        aggregates = list(csv.DictReader(open(tmp_path / "bench_aggregates.csv")))
        assert [row["complexity"] for row in aggregates] == ["3"]
        topologies = sorted((tmp_path / "topologies").glob("*.json"))
        assert len(topologies) == len(small_tasks)

    def test_pairs_manifest_tracks_edits(self, small_tasks, tmp_path):
        out = bench(
            small_tasks,
            "direct",
            make_params(p=1.0, q=0.0),
            seed=2,
            out_dir=tmp_path,
        )
        pairs = json.load(open(tmp_path / "pairs_manifest.json"))
        assert len(pairs) == len(small_tasks)
        for task, row, pair in zip(small_tasks, out["rows"], pairs):
            assert pair["original"] == task.initial.to_ref().id
            assert pair["edited"] == row.final_image
            assert pair["edited"] != pair["original"]

    def test_persist_false_skips_topologies(self, small_tasks, tmp_path):
        bench(small_tasks, "direct", make_params(), seed=2, out_dir=tmp_path, persist=False)
        assert not (tmp_path / "topologies").exists()


class TestAblateDriver:
    def test_all_policies_summarized(self, tmp_path):
        tasks = standard_manifest(count=3, complexity=2, seed=3)
        summary = ablate(tasks, make_params(), seed=6, out_dir=tmp_path)
        assert tuple(summary) == POLICIES
        for policy in POLICIES:
            assert summary[policy]["count"] == 3
        table = list(csv.DictReader(open(tmp_path / "ablate_summary.csv")))
        assert [row["policy"] for row in table] == list(POLICIES)
        entries = list(csv.DictReader(open(tmp_path / "ablate_entries.csv")))
        assert len(entries) == 3 * len(POLICIES)


class TestManifest:
    def test_save_load_round_trip(self, small_tasks, tmp_path):
        path = tmp_path / "manifest.json"
        save_manifest(small_tasks, path)
        loaded = load_manifest(path)
        assert loaded == small_tasks

    def test_standard_manifest_deterministic(self):
        assert standard_manifest(5, 4, 21) == standard_manifest(5, 4, 21)
        assert standard_manifest(5, 4, 21) != standard_manifest(5, 4, 22)
