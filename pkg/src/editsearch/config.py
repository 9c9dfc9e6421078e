"""Run configuration: presets derived from instruction complexity.

All budget and threshold knobs scale from a single integer, the instruction
complexity C (how many stacked requirements the multi-instruction carries).
The five presets differ only in which topology constraints they relax:

    main            full search, depth headroom C + 1
    resampling_only no thought generation, one flat layer of root children
    chain_only      single chain, no branching, no retrieval
    tree_only       tree search without reference retrieval
    full            tree search plus reference retrieval, depth capped at C

resampling_only passes the original instruction straight to the actor
(thought_mode "passthrough"); every other preset generates per-state
thoughts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction

from .errors import ConfigError, InvalidComplexity

PRESETS = ("main", "resampling_only", "chain_only", "tree_only", "full")

THOUGHT_MODE_GENERATE = "generate"
THOUGHT_MODE_PASSTHROUGH = "passthrough"

RANKING_LEXICOGRAPHIC = "lexicographic_vqa_then_clip"
RANKING_WEIGHTED_SUM = "weighted_sum"


@dataclass(frozen=True)
class CompletionThreshold:
    vqa: Fraction
    clip: float


@dataclass(frozen=True)
class VqaBound:
    vqa: Fraction


@dataclass(frozen=True)
class RunConfig:
    max_steps: int
    instruction_volume: int
    max_n_children: int
    max_depth: int
    min_depth: int
    completion_threshold: CompletionThreshold
    degrade_tolerance: VqaBound
    stay_threshold: VqaBound
    search_range: int
    top_k: int
    relevance_threshold: int
    max_n_try: int
    n_repeats: int = 3
    objective_weights: tuple[float, float, float] = (1.0, 1.0, 0.0)
    ranking: str = RANKING_LEXICOGRAPHIC
    scorer_weights: tuple[tuple[str, float], ...] | None = None
    thought_mode: str = THOUGHT_MODE_GENERATE

    def __post_init__(self):
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1", "max_steps")
        if self.min_depth > self.max_depth:
            raise ConfigError(
                f"min_depth {self.min_depth} exceeds max_depth {self.max_depth}", "min_depth"
            )
        if self.max_n_children < 1:
            raise ConfigError("max_n_children must be >= 1", "max_n_children")
        if self.instruction_volume < 1:
            raise ConfigError("instruction_volume must be >= 1", "instruction_volume")
        if not 0 <= self.relevance_threshold <= 100:
            raise ConfigError("relevance_threshold must be in [0, 100]", "relevance_threshold")
        if self.search_range < 0:
            raise ConfigError("search_range must be >= 0", "search_range")
        if self.n_repeats < 1 or self.n_repeats % 2 == 0:
            raise ConfigError("n_repeats must be odd and >= 1", "n_repeats")
        if not 0 <= self.completion_threshold.vqa <= 1:
            raise ConfigError("completion vqa threshold outside [0, 1]", "completion_threshold.vqa")
        if not 0 <= self.stay_threshold.vqa <= 1:
            raise ConfigError("stay vqa threshold outside [0, 1]", "stay_threshold.vqa")
        if self.ranking not in (RANKING_LEXICOGRAPHIC, RANKING_WEIGHTED_SUM):
            raise ConfigError(f"unknown ranking {self.ranking!r}", "ranking")
        if self.thought_mode not in (THOUGHT_MODE_GENERATE, THOUGHT_MODE_PASSTHROUGH):
            raise ConfigError(f"unknown thought_mode {self.thought_mode!r}", "thought_mode")
        if self.scorer_weights is not None:
            total = sum(w for _, w in self.scorer_weights)
            if abs(total - 1.0) > 1e-9:
                raise ConfigError("scorer_weights must sum to 1", "scorer_weights")


def min_depth_for(complexity: int) -> int:
    n = complexity + 1
    return (n + n % 2) // 2


def derive_config(complexity: int, preset: str = "main", **overrides) -> RunConfig:
    """Build the RunConfig for one complexity level and preset.

    Keyword overrides replace derived fields after preset resolution, so
    callers can tweak single knobs (CLI flags, config files) without losing
    the derivation.
    """
    if not isinstance(complexity, int) or isinstance(complexity, bool) or complexity < 1:
        raise InvalidComplexity(complexity)
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}, expected one of {PRESETS}", "preset")

    fields = dict(
        max_steps=2 * (complexity + 1),
        instruction_volume=2,
        max_n_children=2,
        max_depth=complexity + 1,
        min_depth=min_depth_for(complexity),
        completion_threshold=CompletionThreshold(vqa=Fraction(1), clip=1.0),
        degrade_tolerance=VqaBound(vqa=Fraction(0)),
        stay_threshold=VqaBound(vqa=Fraction(1, 10)),
        search_range=2,
        top_k=3,
        relevance_threshold=50,
        max_n_try=3,
        thought_mode=THOUGHT_MODE_GENERATE,
    )
    if preset == "resampling_only":
        fields.update(
            search_range=0,
            max_n_children=2 * (complexity + 1),
            max_depth=1,
            min_depth=1,
            thought_mode=THOUGHT_MODE_PASSTHROUGH,
        )
    elif preset == "chain_only":
        fields.update(search_range=0, max_n_children=1, max_depth=2 * (complexity + 1))
    elif preset == "tree_only":
        fields.update(search_range=0, max_depth=complexity)
    elif preset == "full":
        fields.update(max_depth=complexity)

    fields.update(overrides)
    return RunConfig(**fields)


# ---------------------------------------------------------------------------
# Serialization and digests
# ---------------------------------------------------------------------------

def _fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def config_to_doc(cfg: RunConfig) -> dict:
    return {
        "max_steps": cfg.max_steps,
        "instruction_volume": cfg.instruction_volume,
        "max_n_children": cfg.max_n_children,
        "max_depth": cfg.max_depth,
        "min_depth": cfg.min_depth,
        "completion_threshold": {
            "vqa": _fraction_str(cfg.completion_threshold.vqa),
            "clip": cfg.completion_threshold.clip,
        },
        "degrade_tolerance": {"vqa": _fraction_str(cfg.degrade_tolerance.vqa)},
        "stay_threshold": {"vqa": _fraction_str(cfg.stay_threshold.vqa)},
        "search_range": cfg.search_range,
        "top_k": cfg.top_k,
        "relevance_threshold": cfg.relevance_threshold,
        "max_n_try": cfg.max_n_try,
        "n_repeats": cfg.n_repeats,
        "objective_weights": list(cfg.objective_weights),
        "ranking": cfg.ranking,
        "scorer_weights": None
        if cfg.scorer_weights is None
        else {name: weight for name, weight in cfg.scorer_weights},
        "thought_mode": cfg.thought_mode,
    }


def config_from_doc(doc: dict) -> RunConfig:
    try:
        scorer_weights = doc.get("scorer_weights")
        return RunConfig(
            max_steps=doc["max_steps"],
            instruction_volume=doc["instruction_volume"],
            max_n_children=doc["max_n_children"],
            max_depth=doc["max_depth"],
            min_depth=doc["min_depth"],
            completion_threshold=CompletionThreshold(
                vqa=Fraction(doc["completion_threshold"]["vqa"]),
                clip=float(doc["completion_threshold"]["clip"]),
            ),
            degrade_tolerance=VqaBound(vqa=Fraction(doc["degrade_tolerance"]["vqa"])),
            stay_threshold=VqaBound(vqa=Fraction(doc["stay_threshold"]["vqa"])),
            search_range=doc["search_range"],
            top_k=doc["top_k"],
            relevance_threshold=doc["relevance_threshold"],
            max_n_try=doc["max_n_try"],
            n_repeats=doc.get("n_repeats", 3),
            objective_weights=tuple(doc.get("objective_weights", (1.0, 1.0, 0.0))),
            ranking=doc.get("ranking", RANKING_LEXICOGRAPHIC),
            scorer_weights=None
            if scorer_weights is None
            else tuple(sorted(scorer_weights.items())),
            thought_mode=doc.get("thought_mode", THOUGHT_MODE_GENERATE),
        )
    except KeyError as exc:
        raise ConfigError("missing config key", str(exc.args[0])) from exc


def config_digest(cfg: RunConfig) -> str:
    canonical = json.dumps(config_to_doc(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply a flat or dotted-key mapping of overrides onto a config.

    Dotted keys reach into the threshold sub-objects, e.g.
    "stay_threshold.vqa". Unknown keys raise ConfigError naming the path.
    """
    updates = {}
    for key, value in overrides.items():
        if key in ("completion_threshold.vqa", "completion_threshold.clip"):
            current = updates.get("completion_threshold", cfg.completion_threshold)
            if key.endswith("vqa"):
                updates["completion_threshold"] = CompletionThreshold(
                    vqa=Fraction(value), clip=current.clip
                )
            else:
                updates["completion_threshold"] = CompletionThreshold(
                    vqa=current.vqa, clip=float(value)
                )
        elif key == "degrade_tolerance.vqa":
            updates["degrade_tolerance"] = VqaBound(vqa=Fraction(value))
        elif key == "stay_threshold.vqa":
            updates["stay_threshold"] = VqaBound(vqa=Fraction(value))
        elif key in {f.name for f in dataclasses.fields(RunConfig)}:
            updates[key] = value
        else:
            raise ConfigError("unknown config key", key)
    return dataclasses.replace(cfg, **updates)
