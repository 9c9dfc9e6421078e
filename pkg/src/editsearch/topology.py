"""State and topology data model for budgeted edit-search runs.

A run grows an append-only topology of states. Each state records one
instructor/actor round: the image it started from, the textual instruction
(thought) sent to the actor, the image that came back, and its evaluation.
Transition links form a rooted tree (one parent per state); reference links
form a sparse graph over nearby states that were consulted when the thought
was generated.

The topology is the single source of truth for a run: the event log, the
link lists, and the state map are all appended in creation order and are
never rewritten. The only post-hoc mutation is the activated/idle status
flip applied once when a run finalizes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Protocol

from .errors import (
    CapacityExceeded,
    EmptyInstruction,
    OutOfRange,
    UnknownParent,
    UnknownState,
    UnresolvableImage,
)

ROOT_ID = 0

STATUS_ACTIVATED = "activated"
STATUS_IDLE = "idle"

IMAGE_KIND_FILE = "file"
IMAGE_KIND_SIM = "sim"


# ---------------------------------------------------------------------------
# Image references
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ImageRef:
    """Content-addressed handle to an image.

    kind "file": locator is a workspace-relative path, id the sha256 of the
    file bytes. kind "sim": locator is the inline payload text itself, id the
    sha256 of that text. Two refs with equal id compare equal regardless of
    kind or locator.
    """

    id: str
    kind: str
    locator: str

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageRef):
            return NotImplemented
        return self.id == other.id

    def __hash__(self) -> int:
        return hash(self.id)


def content_id(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_ref(data: bytes, locator: str) -> ImageRef:
    return ImageRef(id=content_id(data), kind=IMAGE_KIND_FILE, locator=locator)


def sim_ref(payload: str) -> ImageRef:
    return ImageRef(id=content_id(payload.encode("utf-8")), kind=IMAGE_KIND_SIM, locator=payload)


def ensure_resolvable(image: ImageRef, workspace=None) -> None:
    """Cheap resolvability check used by root creation.

    Sim payloads must parse as JSON. File refs are checked against the
    workspace when one is supplied; without a workspace there is nothing to
    open, so they pass.
    """
    if image.kind == IMAGE_KIND_SIM:
        try:
            json.loads(image.locator)
        except (TypeError, ValueError) as exc:
            raise UnresolvableImage(f"sim payload is not valid JSON: {exc}") from exc
    elif image.kind == IMAGE_KIND_FILE and workspace is not None:
        if not workspace.exists(image):
            raise UnresolvableImage(f"no such image in workspace: {image.locator}")


# ---------------------------------------------------------------------------
# Clock and events
# ---------------------------------------------------------------------------

class Clock(Protocol):
    def tick(self) -> int: ...


class LogicalClock:
    """Monotone integer clock. The default, so replays are byte-stable."""

    def __init__(self, start: int = 0):
        self._next = start

    def tick(self) -> int:
        value = self._next
        self._next += 1
        return value


@dataclass(frozen=True)
class EventRecord:
    seq: int
    run_id: str
    kind: str
    state_id: int | None
    payload: dict
    ts: int


# ---------------------------------------------------------------------------
# States and links
# ---------------------------------------------------------------------------

@dataclass
class State:
    state_id: int
    parent_id: int | None
    depth: int
    input: ImageRef
    output: ImageRef
    thought: str
    evaluation: object | None = None
    status: str = STATUS_IDLE


@dataclass(frozen=True)
class TransitionLink:
    src: int
    dst: int


@dataclass(frozen=True)
class ReferenceLink:
    at: int
    ref: int
    similarity: int


@dataclass
class InferenceTopology:
    states: dict[int, State] = field(default_factory=dict)
    transitions: list[TransitionLink] = field(default_factory=list)
    references: list[ReferenceLink] = field(default_factory=list)
    events: list[EventRecord] = field(default_factory=list)
    run_id: str = field(default="", compare=False)
    clock: Clock = field(default_factory=LogicalClock, compare=False, repr=False)

    # -- basic accessors ----------------------------------------------------

    @property
    def root(self) -> State:
        return self.states[ROOT_ID]

    @property
    def size(self) -> int:
        """Number of non-root states."""
        return len(self.states) - 1

    def state(self, state_id: int) -> State:
        try:
            return self.states[state_id]
        except KeyError:
            raise UnknownState(f"no state {state_id}") from None

    def children(self, state_id: int) -> list[int]:
        return [t.dst for t in self.transitions if t.src == state_id]

    def fan_out(self, state_id: int) -> int:
        return sum(1 for t in self.transitions if t.src == state_id)

    def bind(self, run_id: str, clock: Clock | None = None) -> None:
        self.run_id = run_id
        if clock is not None:
            self.clock = clock

    def emit(self, kind: str, state_id: int | None = None, payload: dict | None = None) -> EventRecord:
        record = EventRecord(
            seq=len(self.events),
            run_id=self.run_id,
            kind=kind,
            state_id=state_id,
            payload=payload or {},
            ts=self.clock.tick(),
        )
        self.events.append(record)
        return record


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def create_root(image: ImageRef, instruction: str, workspace=None) -> InferenceTopology:
    """Build a topology holding only the root state.

    The root wraps the original image and the original multi-instruction; it
    is never evaluated and both its input and output point at the original
    image.
    """
    if not instruction:
        raise EmptyInstruction("root instruction must be non-empty")
    ensure_resolvable(image, workspace)
    topology = InferenceTopology()
    topology.states[ROOT_ID] = State(
        state_id=ROOT_ID,
        parent_id=None,
        depth=0,
        input=image,
        output=image,
        thought=instruction,
        evaluation=None,
        status=STATUS_IDLE,
    )
    return topology


def append_state(
    topology: InferenceTopology,
    parent_id: int,
    thought: str,
    output: ImageRef,
    evaluation: object | None = None,
    references: Iterable[tuple[int, int]] = (),
    max_children: int | None = None,
) -> int:
    """Append one state under `parent_id` and record its links.

    `references` is an iterable of (state_id, similarity) pairs, already
    filtered by the retriever. When `max_children` is given the parent's
    fan-out is enforced before anything is written.
    """
    if parent_id not in topology.states:
        raise UnknownParent(f"no state {parent_id}")
    parent = topology.states[parent_id]
    if max_children is not None and topology.fan_out(parent_id) >= max_children:
        raise CapacityExceeded(f"state {parent_id} already has {max_children} children")

    state_id = max(topology.states) + 1
    state = State(
        state_id=state_id,
        parent_id=parent_id,
        depth=parent.depth + 1,
        input=parent.output,
        output=output,
        thought=thought,
        evaluation=evaluation,
        status=STATUS_IDLE,
    )
    topology.states[state_id] = state
    topology.transitions.append(TransitionLink(src=parent_id, dst=state_id))
    topology.emit(
        "state_created",
        state_id=state_id,
        payload={"parent_id": parent_id, "depth": state.depth},
    )
    for ref_id, similarity in references:
        topology.references.append(ReferenceLink(at=state_id, ref=ref_id, similarity=similarity))
        topology.emit(
            "reference_linked",
            state_id=state_id,
            payload={"ref": ref_id, "similarity": similarity},
        )
    return state_id


# ---------------------------------------------------------------------------
# Traversal
# ---------------------------------------------------------------------------

def chain_of_states(topology: InferenceTopology, state_id: int) -> list[int]:
    """Root-to-state path, inclusive. Length is depth + 1."""
    state = topology.state(state_id)
    path = [state.state_id]
    while state.parent_id is not None:
        state = topology.state(state.parent_id)
        path.append(state.state_id)
    path.reverse()
    return path


def reference_window(topology: InferenceTopology, parent_id: int, search_range: int) -> list[int]:
    """Candidate reference states for a child about to be created under parent.

    With range r and the new state's depth d = parent.depth + 1, candidates
    are all non-root states at depths [d - r, d + r - 1], excluding the new
    state's direct ancestors (the parent chain). r = 0 disables retrieval.
    """
    if search_range < 0:
        raise OutOfRange("search_range must be >= 0")
    if search_range == 0:
        return []
    parent = topology.state(parent_id)
    d = parent.depth + 1
    lo, hi = d - search_range, d + search_range - 1
    ancestors = set(chain_of_states(topology, parent_id))
    return sorted(
        s.state_id
        for s in topology.states.values()
        if s.state_id != ROOT_ID
        and lo <= s.depth <= hi
        and s.state_id not in ancestors
    )


def prefix(topology: InferenceTopology, n: int) -> InferenceTopology:
    """View of the topology restricted to the root plus the first n states.

    Events are cut at the creation of state n + 1, so the view reads exactly
    like the run did after its n-th step.
    """
    if n < 0 or n > topology.size:
        raise OutOfRange(f"prefix length {n} outside [0, {topology.size}]")
    keep = {ROOT_ID} | set(range(1, n + 1))
    cut = len(topology.events)
    for record in topology.events:
        if record.kind == "state_created" and record.state_id == n + 1:
            cut = record.seq
            break
    view = InferenceTopology(
        states={sid: replace(topology.states[sid]) for sid in keep if sid in topology.states},
        transitions=[t for t in topology.transitions if t.src in keep and t.dst in keep],
        references=[r for r in topology.references if r.at in keep and r.ref in keep],
        events=[e for e in topology.events if e.seq < cut],
        run_id=topology.run_id,
    )
    return view
