"""Benchmark and ablation drivers over the simulated world.

A manifest is a list of sim tasks at known complexity. The bench driver
runs one preset over the manifest and reports per-entry rows plus
per-complexity aggregates (mean topology size with standard error, mean
final scores, exact CIF). The ablation driver runs the five search
policies over one manifest and reports the comparison table.

Policies map onto presets; "direct" is the degenerate search: one state,
one passthrough instruction, no retries. The sim actor's per-call edit
limit is raised to the task complexity for every policy so that
passthrough instructions stay parseable and all policies face the same
actor.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .analytics import mean_and_stderr
from .config import RunConfig, apply_overrides, config_digest, derive_config
from .engine import RunResult, run
from .ports import Backends
from .serialize import write_document
from .simworld import (
    SimActor,
    SimActorParams,
    SimChat,
    SimEmbedder,
    SimScorer,
    SimTask,
    gen_tasks,
    hash64,
)

POLICIES = ("direct", "resampling_only", "chain_only", "tree_only", "full")


@dataclass(frozen=True)
class EntryResult:
    index: int
    complexity: int
    policy: str
    size: int
    termination: str
    final_vqa: Fraction
    final_clip: float
    steps_to_best: int
    fallback_used: bool
    final_image: str


def policy_config(policy: str, complexity: int) -> RunConfig:
    if policy == "direct":
        cfg = derive_config(complexity, "resampling_only")
        return apply_overrides(cfg, {"max_steps": 1, "max_n_children": 1})
    return derive_config(complexity, policy)


def sim_backends(params: SimActorParams) -> Backends:
    return Backends(
        actor=SimActor(params),
        chat=SimChat(),
        embedder=SimEmbedder(),
        scorer=SimScorer(),
    )


def run_entry(
    task: SimTask,
    cfg: RunConfig,
    params: SimActorParams,
    run_tag: str = "",
) -> RunResult:
    backends = sim_backends(params)
    return run(
        image=task.initial.to_ref(),
        instruction=task.instruction(),
        backends=backends,
        cfg=cfg,
        run_tag=run_tag,
    )


def _entry_row(index: int, policy: str, task: SimTask, result: RunResult) -> EntryResult:
    best_id = min(result.final_states)
    best = result.topology.state(best_id)
    return EntryResult(
        index=index,
        complexity=task.complexity,
        policy=policy,
        size=result.topology.size,
        termination=result.termination,
        final_vqa=best.evaluation.vqa_score,
        final_clip=best.evaluation.clip_i,
        steps_to_best=best_id,
        fallback_used=result.fallback_used,
        final_image=best.output.id,
    )


def _entry_params(base: SimActorParams, seed: int, index: int, complexity: int) -> SimActorParams:
    k = max(complexity, base.k)
    return SimActorParams(
        p=base.p,
        q=base.q,
        k=k,
        seed=hash64("actor", seed, index),
        persistence=base.persistence,
    )


def run_policy(
    tasks: list[SimTask],
    policy: str,
    params: SimActorParams,
    seed: int,
    persist_dir: Path | None = None,
) -> list[EntryResult]:
    rows = []
    for index, task in enumerate(tasks):
        cfg = policy_config(policy, task.complexity)
        entry_params = _entry_params(params, seed, index, task.complexity)
        result = run_entry(task, cfg, entry_params, run_tag=f"{policy}:{index}")
        rows.append(_entry_row(index, policy, task, result))
        if persist_dir is not None:
            persist_dir.mkdir(parents=True, exist_ok=True)
            write_document(result.topology, config_digest(cfg), persist_dir / f"{policy}_{index:04d}.json")
    return rows


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def aggregate_by_complexity(rows: list[EntryResult]) -> list[dict]:
    by_c: dict[int, list[EntryResult]] = {}
    for row in rows:
        by_c.setdefault(row.complexity, []).append(row)
    out = []
    for complexity in sorted(by_c) :
        group = by_c[complexity]
        mean_size, stderr_size = mean_and_stderr([float(r.size) for r in group])
        mean_vqa = sum(r.final_vqa for r in group) / len(group)
        cif = Fraction(sum(1 for r in group if r.final_vqa == 1), len(group))
        mean_clip = sum(r.final_clip for r in group) / len(group)
        out.append(
            {
                "complexity": complexity,
                "count": len(group),
                "mean_size": mean_size,
                "stderr_size": stderr_size,
                "mean_vqa": float(mean_vqa),
                "cif": str(cif),
                "cif_float": float(cif),
                "mean_clip": mean_clip,
            }
        )
    return out


def summarize_policy(rows: list[EntryResult]) -> dict:
    mean_vqa = sum(r.final_vqa for r in rows) / len(rows)
    cif = Fraction(sum(1 for r in rows if r.final_vqa == 1), len(rows))
    mean_size, stderr_size = mean_and_stderr([float(r.size) for r in rows])
    return {
        "count": len(rows),
        "mean_vqa": float(mean_vqa),
        "cif": str(cif),
        "cif_float": float(cif),
        "mean_clip": sum(r.final_clip for r in rows) / len(rows),
        "mean_size": mean_size,
        "stderr_size": stderr_size,
    }


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

def bench(
    tasks: list[SimTask],
    preset: str,
    params: SimActorParams,
    seed: int,
    out_dir: Path,
    persist: bool = True,
) -> dict:
    """One preset over a manifest; writes rows, aggregates, and FID pairs."""
    out_dir.mkdir(parents=True, exist_ok=True)
    policy = preset
    persist_dir = out_dir / "topologies" if persist else None
    rows = run_policy(tasks, policy, params, seed, persist_dir)
    write_entry_rows(rows, out_dir / "bench_entries.csv")
    aggregates = aggregate_by_complexity(rows)
    with open(out_dir / "bench_aggregates.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(aggregates[0].keys()))
        writer.writeheader()
        writer.writerows(aggregates)
    _write_pairs_manifest(tasks, rows, out_dir / "pairs_manifest.json")
    return {"rows": rows, "aggregates": aggregates}


def ablate(
    tasks: list[SimTask],
    params: SimActorParams,
    seed: int,
    out_dir: Path | None = None,
) -> dict[str, dict]:
    """Five policies over one manifest; the Appendix C style comparison."""
    summary: dict[str, dict] = {}
    all_rows: list[EntryResult] = []
    for policy in POLICIES:
        rows = run_policy(tasks, policy, params, seed)
        all_rows.extend(rows)
        summary[policy] = summarize_policy(rows)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_entry_rows(all_rows, out_dir / "ablate_entries.csv")
        with open(out_dir / "ablate_summary.csv", "w", newline="", encoding="utf-8") as fh:
            fieldnames = ["policy"] + list(next(iter(summary.values())).keys())
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            for policy in POLICIES:
                writer.writerow({"policy": policy, **summary[policy]})
    return summary


def write_entry_rows(rows: list[EntryResult], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "index",
                "complexity",
                "policy",
                "size",
                "termination",
                "final_vqa",
                "final_clip",
                "steps_to_best",
                "fallback_used",
                "final_image",
            ]
        )
        for r in rows:
            writer.writerow(
                [
                    r.index,
                    r.complexity,
                    r.policy,
                    r.size,
                    r.termination,
                    str(r.final_vqa),
                    repr(r.final_clip),
                    r.steps_to_best,
                    int(r.fallback_used),
                    r.final_image,
                ]
            )


def _write_pairs_manifest(tasks: list[SimTask], rows: list[EntryResult], path: Path) -> None:
    # Hook for external FID tooling: (original, edited) references per entry.
    pairs = []
    for task, row in zip(tasks, rows):
        pairs.append(
            {
                "index": row.index,
                "original": task.initial.to_ref().id,
                "edited": row.final_image,
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(pairs, fh, indent=1, sort_keys=True)


def load_manifest(path: Path) -> list[SimTask]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return [SimTask.from_doc(entry) for entry in doc["tasks"]]


def save_manifest(tasks: list[SimTask], path: Path) -> None:
    doc = {"tasks": [task.to_doc() for task in tasks]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def standard_manifest(count: int, complexity: int, seed: int) -> list[SimTask]:
    return gen_tasks(count, complexity, seed)
