"""Windowed reference retrieval over the inference topology.

Candidates come from a depth window around the state under construction,
minus the ancestor chain. Each candidate's input image is scored against
the expanding parent's output image; candidates at or above the relevance
floor survive, and the top K by similarity are returned. A candidate whose
scoring fails is dropped and logged rather than failing the run: references
steer generation away from repeated mistakes but are never load-bearing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .config import RunConfig
from .errors import DistanceOutOfRange, ScorerUnavailable
from .ports import ScorerPort
from .topology import ImageRef, InferenceTopology, chain_of_states, reference_window

EventLog = Callable[[str, dict], None]


def _noop_log(kind: str, payload: dict) -> None:
    pass


@dataclass(frozen=True)
class ReferenceEntry:
    state_id: int
    thought: str
    similarity: int


@dataclass(frozen=True)
class ReferenceSet:
    entries: tuple[ReferenceEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def pairs(self) -> list[tuple[str, int]]:
        """(thought, similarity) pairs in ranked order, for prompt rendering."""
        return [(e.thought, e.similarity) for e in self.entries]


def score_similarity(
    a: ImageRef,
    b: ImageRef,
    scorer: ScorerPort,
    weights: tuple[tuple[str, float], ...] | None = None,
) -> int:
    """Weighted scorer distances mapped to an integer similarity in [0, 100].

    score = round(100 * (1 - sum w_i * d_i)), half away from zero, clamped.
    With weights=None every channel the scorer reports gets equal weight.
    """
    distances = scorer.distances(a, b)
    if not distances:
        raise ScorerUnavailable("scorer returned no distance channels")
    for name, value in distances.items():
        if not 0.0 <= value <= 1.0:
            raise DistanceOutOfRange(f"channel {name!r} reported {value!r}, outside [0, 1]")
    if weights is None:
        channels = sorted(distances)
        weights = tuple((name, 1.0 / len(channels)) for name in channels)
    blended = 0.0
    for name, weight in weights:
        if name not in distances:
            raise ScorerUnavailable(f"scorer does not report channel {name!r}")
        blended += weight * distances[name]
    raw = 100.0 * (1.0 - blended)
    score = int(raw + 0.5) if raw >= 0.0 else -int(-raw + 0.5)
    return max(0, min(100, score))


def retrieve_references(
    topology: InferenceTopology,
    parent_id: int,
    cfg: RunConfig,
    scorer: ScorerPort,
    log: EventLog = _noop_log,
) -> ReferenceSet:
    """Collect, score, filter, and rank reference candidates for a new child."""
    if cfg.search_range == 0:
        return ReferenceSet(entries=())
    parent = topology.state(parent_id)
    window = reference_window(topology, parent_id, cfg.search_range)
    ancestors = set(chain_of_states(topology, parent_id))

    scored: list[ReferenceEntry] = []
    for candidate_id in window:
        if candidate_id in ancestors:
            continue
        candidate = topology.state(candidate_id)
        try:
            similarity = score_similarity(
                candidate.input, parent.output, scorer, cfg.scorer_weights
            )
        except (ScorerUnavailable, DistanceOutOfRange) as exc:
            log("candidate_dropped", {"state_id": candidate_id, "error": str(exc)})
            continue
        if similarity >= cfg.relevance_threshold:
            scored.append(
                ReferenceEntry(
                    state_id=candidate_id,
                    thought=candidate.thought,
                    similarity=similarity,
                )
            )

    scored.sort(key=lambda entry: (-entry.similarity, entry.state_id))
    return ReferenceSet(entries=tuple(scored[: cfg.top_k]))
