"""Command-line interface.

Subcommands: run, bench, ablate, fit, report, gen-manifest, serve.
Configuration precedence is flag > config file > derived default: every run
starts from derive_config(complexity, preset), then the config file's "run"
section is applied, then explicit flags and --set pairs.

Exit codes: 0 success, 1 entry/run failure, 2 configuration error,
3 backend unreachable.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from .bench import (
    POLICIES,
    ablate,
    bench,
    load_manifest,
    run_entry,
    save_manifest,
    standard_manifest,
)
from .config import apply_overrides, config_digest, derive_config
from .engine import run
from .errors import (
    BackendUnavailable,
    ConfigError,
    EditSearchError,
    GatewayError,
    InvalidComplexity,
)
from .gateway import EndpointConfig, HttpActor, HttpChat, HttpEmbedder, HttpScorer
from .imagesim import FallbackScorer
from .ports import Backends
from .serialize import read_document, write_document
from .simworld import Lcg, SimActorParams, SimTask, gen_task, hash64
from .workspace import Workspace

EXIT_OK = 0
EXIT_ENTRY_FAILED = 1
EXIT_CONFIG = 2
EXIT_BACKEND = 3


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError("config file not found", path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}", path)
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object", path)
    return doc


def _decode_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _collect_overrides(args, file_doc: dict) -> dict:
    merged: dict = {}
    merged.update(file_doc.get("run", {}))
    for key in (
        "max_steps",
        "max_n_children",
        "max_depth",
        "min_depth",
        "search_range",
        "top_k",
        "relevance_threshold",
        "max_n_try",
        "n_repeats",
        "instruction_volume",
        "ranking",
        "thought_mode",
    ):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise ConfigError("--set expects key=value", pair)
        key, raw = pair.split("=", 1)
        merged[key] = _decode_value(raw)
    return merged


def _build_config(args, file_doc: dict):
    cfg = derive_config(args.complexity, args.preset)
    overrides = _collect_overrides(args, file_doc)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def _endpoint_from_doc(doc: dict, path: str) -> EndpointConfig:
    if "base_url" not in doc:
        raise ConfigError("missing config key", f"{path}.base_url")
    return EndpointConfig(
        base_url=doc["base_url"],
        token_env=doc.get("token_env", ""),
        model=doc.get("model", ""),
        timeout_s=float(doc.get("timeout_s", 120.0)),
        max_retries=int(doc.get("max_retries", 2)),
        backoff_ms=int(doc.get("backoff_ms", 250)),
    )


def _load_tasks(path: Path):
    try:
        return load_manifest(path)
    except FileNotFoundError:
        raise ConfigError("manifest file not found", str(path))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest is not valid JSON: {exc}", str(path))


def _sim_params(args, complexity: int, cfg) -> SimActorParams:
    return SimActorParams(
        p=args.p,
        q=args.q,
        k=max(complexity, cfg.instruction_volume),
        seed=args.seed,
        persistence=args.persistence,
    )


def _http_backends(file_doc: dict, workspace: Workspace) -> Backends:
    endpoints = file_doc.get("endpoints", {})
    for name in ("chat", "actor", "embed"):
        if name not in endpoints:
            raise ConfigError("missing config key", f"endpoints.{name}")
    chat = HttpChat(_endpoint_from_doc(endpoints["chat"], "endpoints.chat"), workspace)
    actor = HttpActor(_endpoint_from_doc(endpoints["actor"], "endpoints.actor"), workspace)
    embedder = HttpEmbedder(_endpoint_from_doc(endpoints["embed"], "endpoints.embed"), workspace)
    if "scorer" in endpoints:
        scorer = HttpScorer(_endpoint_from_doc(endpoints["scorer"], "endpoints.scorer"), workspace)
    else:
        scorer = FallbackScorer(workspace)
    return Backends(actor=actor, chat=chat, embedder=embedder, scorer=scorer)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    file_doc = _load_config_file(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.task:
        with open(args.task, encoding="utf-8") as fh:
            task = SimTask.from_doc(json.load(fh))
        args.complexity = task.complexity
        cfg = _build_config(args, file_doc)
        params = _sim_params(args, task.complexity, cfg)
        result = run_entry(task, cfg, params, run_tag=args.run_tag)
    elif args.image:
        if args.complexity is None or not args.instruction:
            raise ConfigError("image runs need --complexity and --instruction", "run")
        cfg = _build_config(args, file_doc)
        workspace = Workspace(file_doc.get("workspace", out_dir / "workspace"))
        backends = _http_backends(file_doc, workspace)
        image = workspace.import_file(args.image)
        result = run(
            image=image,
            instruction=args.instruction,
            backends=backends,
            cfg=cfg,
            run_tag=args.run_tag,
            workspace=workspace,
        )
    else:
        if args.complexity is None:
            raise ConfigError("sim runs need --complexity (or --task)", "run")
        cfg = _build_config(args, file_doc)
        task = gen_task(args.complexity, Lcg(hash64("cli-task", args.seed)))
        params = _sim_params(args, task.complexity, cfg)
        result = run_entry(task, cfg, params, run_tag=args.run_tag)

    write_document(result.topology, config_digest(cfg), out_dir / "topology.json")
    best = result.topology.state(min(result.final_states))
    summary = {
        "run_id": result.topology.run_id,
        "termination": result.termination,
        "final_states": list(result.final_states),
        "fallback_used": result.fallback_used,
        "size": result.topology.size,
        "best_vqa": str(best.evaluation.vqa_score),
        "best_clip": best.evaluation.clip_i,
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    print(
        f"run {summary['run_id']}: {summary['termination']}, "
        f"size {summary['size']}, best vqa {summary['best_vqa']}, "
        f"best clip {summary['best_clip']:.4f}"
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    tasks = _load_tasks(Path(args.manifest))
    out_dir = Path(args.out)
    base = SimActorParams(p=args.p, q=args.q, k=2, seed=args.seed, persistence=args.persistence)
    outcome = bench(tasks, args.preset, base, args.seed, out_dir, persist=not args.no_persist)
    if not args.no_figures:
        from .figures import fig_bench

        fig_bench(outcome["aggregates"], out_dir / "bench.png")
    for row in outcome["aggregates"]:
        print(
            f"C={row['complexity']}: size {row['mean_size']:.2f}±{row['stderr_size']:.2f}, "
            f"vqa {row['mean_vqa']:.3f}, cif {row['cif']}, clip {row['mean_clip']:.3f}"
        )
    return EXIT_OK


def cmd_ablate(args) -> int:
    tasks = _load_tasks(Path(args.manifest))
    out_dir = Path(args.out)
    base = SimActorParams(p=args.p, q=args.q, k=2, seed=args.seed, persistence=args.persistence)
    summary = ablate(tasks, base, args.seed, out_dir)
    if not args.no_figures:
        from .figures import fig_ablation

        fig_ablation(summary, out_dir / "ablation.png")
    for policy in POLICIES:
        row = summary[policy]
        print(
            f"{policy:>16}: vqa {row['mean_vqa']:.3f}, cif {row['cif']}, "
            f"clip {row['mean_clip']:.3f}, size {row['mean_size']:.2f}"
        )
    return EXIT_OK


def cmd_fit(args) -> int:
    from .analytics import fit_topology_sizes

    points: list[tuple[float, float]] = []
    with open(args.points, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            x = row.get("complexity") or row.get("C")
            y = row.get("mean_size") or row.get("size")
            if x is None or y is None:
                raise ConfigError("points file needs complexity and mean_size columns", args.points)
            points.append((float(x), float(y)))
    fit = fit_topology_sizes(points)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "slope": fit.slope,
        "bias": fit.bias,
        "n": fit.n,
        "dof": fit.dof,
        "degenerate": fit.degenerate,
        "slope_stderr": fit.slope_stderr,
        "bias_stderr": fit.bias_stderr,
        "slope_p": fit.slope_p,
        "bias_p": fit.bias_p,
        "slope_ci95": fit.slope_ci95,
        "bias_ci95": fit.bias_ci95,
    }
    with open(out_dir / "fit.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
    if not args.no_figures:
        from .figures import fig_fit

        fig_fit(points, fit, out_dir / "fit.png")
    print(f"slope {fit.slope:.4f}, bias {fit.bias:.4f}, n {fit.n}")
    return EXIT_OK


def cmd_report(args) -> int:
    from .analytics import scaling_report

    topo_dir = Path(args.topologies)
    paths = sorted(topo_dir.glob("*.json"))
    if not paths:
        raise ConfigError("no topology documents found", str(topo_dir))
    topologies = []
    for path in paths:
        topology, _ = read_document(path)
        topologies.append(topology)
    rows = scaling_report(topologies, args.mode)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_csv = out_dir / f"scaling_{args.mode}.csv"
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    if not args.no_figures:
        if args.mode == "steps":
            from .figures import fig_scaling_steps

            fig_scaling_steps(rows, out_dir / "scaling_steps.png")
        else:
            from .figures import fig_scaling_depth

            fig_scaling_depth(rows, out_dir / "scaling_depth.png")
    print(f"wrote {out_csv} ({len(rows)} rows over {len(topologies)} runs)")
    return EXIT_OK


def cmd_gen_manifest(args) -> int:
    tasks = standard_manifest(args.count, args.complexity, args.seed)
    save_manifest(tasks, Path(args.out))
    print(f"wrote {args.out}: {len(tasks)} tasks at C={args.complexity}, seed {args.seed}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .serve import serve

    workspace = Workspace(args.workspace) if args.workspace else None
    token = os.environ.get(args.token_env, "") if args.token_env else ""
    serve(host=args.host, port=args.port, workspace=workspace, token=token)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_config_flags(sub) -> None:
    sub.add_argument("--config", default=None, help="JSON config file")
    sub.add_argument("--preset", default="main")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    for key in (
        "max_steps",
        "max_n_children",
        "max_depth",
        "min_depth",
        "search_range",
        "top_k",
        "relevance_threshold",
        "max_n_try",
        "n_repeats",
        "instruction_volume",
    ):
        sub.add_argument(f"--{key.replace('_', '-')}", dest=key, type=int, default=None)
    sub.add_argument("--ranking", default=None)
    sub.add_argument("--thought-mode", dest="thought_mode", default=None)


def _add_sim_flags(sub) -> None:
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--p", type=float, default=0.85)
    sub.add_argument("--q", type=float, default=0.05)
    sub.add_argument("--persistence", type=float, default=0.85)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="editsearch")
    commands = parser.add_subparsers(dest="command", required=True)

    p_run = commands.add_parser("run", help="one search run (sim or remote backends)")
    p_run.add_argument("--instruction", default="")
    p_run.add_argument("--complexity", type=int, default=None)
    p_run.add_argument("--task", default=None, help="sim task JSON file")
    p_run.add_argument("--image", default=None, help="input image file (remote backends)")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--run-tag", dest="run_tag", default="")
    _add_config_flags(p_run)
    _add_sim_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_bench = commands.add_parser("bench", help="one preset over a sim manifest")
    p_bench.add_argument("--manifest", required=True)
    p_bench.add_argument("--preset", default="main")
    p_bench.add_argument("--out", default="bench_out")
    p_bench.add_argument("--no-persist", action="store_true")
    p_bench.add_argument("--no-figures", action="store_true")
    _add_sim_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_ablate = commands.add_parser("ablate", help="five policies over a sim manifest")
    p_ablate.add_argument("--manifest", required=True)
    p_ablate.add_argument("--out", default="ablate_out")
    p_ablate.add_argument("--no-figures", action="store_true")
    _add_sim_flags(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_fit = commands.add_parser("fit", help="OLS fit of mean size vs complexity")
    p_fit.add_argument("--points", required=True, help="CSV with complexity, mean_size")
    p_fit.add_argument("--out", default="fit_out")
    p_fit.add_argument("--no-figures", action="store_true")
    p_fit.set_defaults(func=cmd_fit)

    p_report = commands.add_parser("report", help="anytime scaling curves")
    p_report.add_argument("--topologies", required=True, help="directory of topology JSON docs")
    p_report.add_argument("--mode", choices=("steps", "depth"), default="steps")
    p_report.add_argument("--out", default="report_out")
    p_report.add_argument("--no-figures", action="store_true")
    p_report.set_defaults(func=cmd_report)

    p_gen = commands.add_parser("gen-manifest", help="write a seeded sim manifest")
    p_gen.add_argument("--count", type=int, default=200)
    p_gen.add_argument("--complexity", type=int, default=6)
    p_gen.add_argument("--seed", type=int, default=42)
    p_gen.add_argument("--out", default="manifest.json")
    p_gen.set_defaults(func=cmd_gen_manifest)

    p_serve = commands.add_parser("serve", help="HTTP service for live runs")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--workspace", default=None)
    p_serve.add_argument("--token-env", dest="token_env", default=None)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidComplexity) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GatewayError, BackendUnavailable) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except EditSearchError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_ENTRY_FAILED


if __name__ == "__main__":
    sys.exit(main())
