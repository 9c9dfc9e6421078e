"""Run loop: depth-first expansion with stay checks and backtracking.

Each iteration creates exactly one state, so the step budget bounds the
loop. After a state is created and evaluated the scheduler applies its
five-step procedure in a fixed order:

  1. track the optimal state (rank, then depth tie-breaks);
  2. stop if the step budget is spent (checked before completion, so a
     budget hit on the final step wins even if that state completes);
  3. stop if the tracked optimal meets the completion thresholds at an
     eligible depth;
  4. test the new state against the four stay constraints - pass means it
     becomes the next parent;
  5. otherwise backtrack to the nearest ancestor with spare child capacity
     and room below the depth ceiling; none left means termination.

Controls (pause, resume, prune, force_backtrack, accept) are applied only
at step boundaries, never mid-expansion, which keeps replay deterministic:
a control script keyed by step index reproduces a live session exactly.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass
from typing import Protocol

from .config import (
    RANKING_WEIGHTED_SUM,
    THOUGHT_MODE_PASSTHROUGH,
    RunConfig,
    config_digest,
)
from .evaluator import Checklist, Evaluation, build_checklist, evaluate_state
from .generator import Thought, generate_thought, make_context
from .ports import Backends
from .retriever import retrieve_references
from .topology import (
    ROOT_ID,
    STATUS_ACTIVATED,
    Clock,
    ImageRef,
    InferenceTopology,
    LogicalClock,
    append_state,
    chain_of_states,
    create_root,
)

TERMINATION_COMPLETED = "completed"
TERMINATION_BUDGET = "budget_exhausted"
TERMINATION_BACKTRACK = "backtrack_exhausted"

CONTROL_PAUSE = "pause"
CONTROL_RESUME = "resume"
CONTROL_PRUNE = "prune"
CONTROL_FORCE_BACKTRACK = "force_backtrack"
CONTROL_ACCEPT = "accept"

STAY_VQA_FLOOR = "stay_threshold"
STAY_DEPTH_CEILING = "max_depth"
STAY_DEGRADE = "degrade_tolerance"
STAY_COMPLETE = "completion_reached"


@dataclass(frozen=True)
class Control:
    kind: str
    state_id: int | None = None


class ControlSource(Protocol):
    def poll(self, step: int) -> list[Control]: ...


class NoControls:
    def poll(self, step: int) -> list[Control]:
        return []


class ScriptedControls:
    """Controls keyed by topology size; each batch is delivered once, at the
    step boundary where that many states exist."""

    def __init__(self, script: dict[int, list[Control]]):
        self.script = {step: list(batch) for step, batch in script.items()}

    def poll(self, step: int) -> list[Control]:
        return self.script.pop(step, [])


class QueueControls:
    """Thread-safe control feed for live (serve-mode) runs."""

    def __init__(self):
        self._lock = threading.Lock()
        self._pending: list[Control] = []

    def push(self, control: Control) -> None:
        with self._lock:
            self._pending.append(control)

    def poll(self, step: int) -> list[Control]:
        with self._lock:
            drained, self._pending = self._pending, []
            return drained


# ---------------------------------------------------------------------------
# Ranking and the scheduler predicates
# ---------------------------------------------------------------------------

def _rank_key(evaluation: Evaluation, cfg: RunConfig):
    if cfg.ranking == RANKING_WEIGHTED_SUM:
        lam1, lam2, _ = cfg.objective_weights
        return (lam1 * float(evaluation.vqa_score) + lam2 * evaluation.clip_i,)
    return (evaluation.vqa_score, evaluation.clip_i)


def rank(a: Evaluation, b: Evaluation, cfg: RunConfig) -> int:
    """-1, 0, or 1: how a compares to b under the configured objective."""
    key_a, key_b = _rank_key(a, cfg), _rank_key(b, cfg)
    if key_a < key_b:
        return -1
    if key_a > key_b:
        return 1
    return 0


def update_optimal(
    current: list[int], candidate: int, topology: InferenceTopology, cfg: RunConfig
) -> list[int]:
    """Fold one evaluated state into a pool of same-ranked bests.

    Higher rank replaces; a rank tie goes to the shallower state; a tie at
    the same depth retains both.
    """
    state = topology.state(candidate)
    if not current:
        return [candidate]
    incumbent = topology.state(current[0])
    order = rank(state.evaluation, incumbent.evaluation, cfg)
    if order > 0:
        return [candidate]
    if order < 0:
        return current
    if state.depth < incumbent.depth:
        return [candidate]
    if state.depth > incumbent.depth:
        return current
    return current + [candidate]


class OptimalTracker:
    """Two best-pools: states at eligible depth, and all evaluated states.

    The eligible pool drives completion and final selection; the overall
    pool only matters when the run never reaches the minimum depth
    (fallback selection).
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.eligible: list[int] = []
        self.overall: list[int] = []

    def add(self, topology: InferenceTopology, state_id: int) -> None:
        state = topology.state(state_id)
        if state.evaluation is None:
            return
        self.overall = update_optimal(self.overall, state_id, topology, self.cfg)
        if state.depth >= self.cfg.min_depth:
            self.eligible = update_optimal(self.eligible, state_id, topology, self.cfg)

    def rebuild(self, topology: InferenceTopology, pruned: set[int]) -> None:
        self.eligible, self.overall = [], []
        for state_id in sorted(topology.states):
            if state_id == ROOT_ID or state_id in pruned:
                continue
            self.add(topology, state_id)

    def final(self) -> tuple[list[int], bool]:
        if self.eligible:
            return list(self.eligible), False
        return list(self.overall), True

    def snapshot(self) -> dict:
        return {"eligible": list(self.eligible), "overall": list(self.overall)}


def check_completion(evaluation: Evaluation, depth: int, cfg: RunConfig) -> bool:
    return (
        evaluation.vqa_score >= cfg.completion_threshold.vqa
        and evaluation.clip_i >= cfg.completion_threshold.clip
        and depth >= cfg.min_depth
    )


def check_stay(
    evaluation: Evaluation,
    parent_evaluation: Evaluation | None,
    depth: int,
    cfg: RunConfig,
) -> tuple[bool, list[str]]:
    """The four stay constraints; returns (passed, names of failures)."""
    failed = []
    if evaluation.vqa_score < cfg.stay_threshold.vqa:
        failed.append(STAY_VQA_FLOOR)
    if depth >= cfg.max_depth:
        failed.append(STAY_DEPTH_CEILING)
    if parent_evaluation is not None:
        degrade = parent_evaluation.vqa_score - evaluation.vqa_score
        if degrade > cfg.degrade_tolerance.vqa:
            failed.append(STAY_DEGRADE)
    if (
        evaluation.vqa_score >= cfg.completion_threshold.vqa
        and evaluation.clip_i >= cfg.completion_threshold.clip
    ):
        failed.append(STAY_COMPLETE)
    return (not failed, failed)


def backtrack(
    topology: InferenceTopology,
    from_state: int,
    cfg: RunConfig,
    pruned: frozenset[int] | set[int] = frozenset(),
) -> int | None:
    """Nearest ancestor that can still take a child, or None."""
    state = topology.state(from_state)
    while state.parent_id is not None:
        state = topology.state(state.parent_id)
        if state.state_id in pruned:
            continue
        if (
            topology.fan_out(state.state_id) < cfg.max_n_children
            and state.depth < cfg.max_depth
        ):
            return state.state_id
    return None


# ---------------------------------------------------------------------------
# Run loop
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class RunResult:
    final_states: tuple[int, ...]
    topology: InferenceTopology
    termination: str
    fallback_used: bool


class RunLoop:
    def __init__(
        self,
        image: ImageRef,
        instruction: str,
        backends: Backends,
        cfg: RunConfig,
        controls: ControlSource,
        run_tag: str,
        clock: Clock | None,
        workspace=None,
    ):
        self.instruction = instruction
        self.backends = backends
        self.cfg = cfg
        self.controls = controls
        self.topology = create_root(image, instruction, workspace)
        digest = config_digest(cfg)
        run_id = hashlib.sha256(
            (digest + image.id + instruction + run_tag).encode("utf-8")
        ).hexdigest()[:12]
        self.topology.bind(run_id, clock if clock is not None else LogicalClock())
        self.digest = digest
        self.parent_id = ROOT_ID
        self.pruned: set[int] = set()
        self.tracker = OptimalTracker(cfg)
        self.paused = False
        self.termination: str | None = None
        self.accepted: int | None = None
        self.checklist: Checklist | None = None

    # -- plumbing ----------------------------------------------------------

    def log(self, kind: str, payload: dict) -> None:
        self.topology.emit(kind, payload=payload)

    def execute(self) -> RunResult:
        self.topology.emit(
            "run_started",
            payload={"config_digest": self.digest, "instruction": self.instruction},
        )
        self.checklist = build_checklist(
            self.instruction,
            self.topology.root.output,
            self.backends.chat,
            self.cfg,
            self.log,
        )
        self.topology.emit(
            "checklist_built", payload={"questions": list(self.checklist.questions)}
        )
        while self.termination is None:
            self._control_boundary()
            if self.termination is not None:
                break
            self._expand_once()
        return self._finalize()

    # -- controls ----------------------------------------------------------

    def _control_boundary(self) -> None:
        while True:
            for command in self.controls.poll(self.topology.size):
                self._apply(command)
                if self.termination is not None:
                    return
            if not self.paused:
                return
            time.sleep(0.01)

    def _apply(self, command: Control) -> None:
        self.topology.emit(
            "control_applied",
            payload={"kind": command.kind, "state_id": command.state_id},
        )
        if command.kind == CONTROL_PAUSE:
            self.paused = True
            self.topology.emit("paused")
        elif command.kind == CONTROL_RESUME:
            self.paused = False
            self.topology.emit("resumed")
        elif command.kind == CONTROL_PRUNE:
            self._prune(command.state_id)
        elif command.kind == CONTROL_FORCE_BACKTRACK:
            if self.parent_id == ROOT_ID:
                self._reject(command, "cannot backtrack above the root")
            else:
                self._backtrack_from(self.parent_id, forced=True)
        elif command.kind == CONTROL_ACCEPT:
            state_id = command.state_id
            if (
                state_id is None
                or state_id == ROOT_ID
                or state_id not in self.topology.states
                or self.topology.states[state_id].evaluation is None
            ):
                self._reject(command, "accept requires an evaluated non-root state")
            else:
                self.accepted = state_id
                self.termination = TERMINATION_COMPLETED
                self.topology.emit("accepted", state_id=state_id)
        else:
            self._reject(command, "unknown control kind")

    def _reject(self, command: Control, reason: str) -> None:
        self.topology.emit(
            "control_rejected",
            payload={"kind": command.kind, "state_id": command.state_id, "reason": reason},
        )

    def _prune(self, state_id: int | None) -> None:
        if state_id is None or state_id == ROOT_ID or state_id not in self.topology.states:
            self._reject(Control(CONTROL_PRUNE, state_id), "prune requires an existing non-root state")
            return
        subtree = {state_id}
        frontier = [state_id]
        while frontier:
            current = frontier.pop()
            for child in self.topology.children(current):
                if child not in subtree:
                    subtree.add(child)
                    frontier.append(child)
        self.pruned |= subtree
        self.topology.emit(
            "pruned", state_id=state_id, payload={"subtree": sorted(subtree)}
        )
        self.tracker.rebuild(self.topology, self.pruned)
        if self.parent_id in self.pruned:
            self._backtrack_from(self.parent_id, forced=True)

    # -- scheduler ---------------------------------------------------------

    def _backtrack_from(self, state_id: int, forced: bool) -> None:
        target = backtrack(self.topology, state_id, self.cfg, self.pruned)
        self.topology.emit(
            "backtracked",
            payload={"from": state_id, "to": target, "forced": forced},
        )
        if target is None:
            self.termination = TERMINATION_BACKTRACK
        else:
            self.parent_id = target

    def _expand_once(self) -> None:
        parent = self.topology.state(self.parent_id)
        references = retrieve_references(
            self.topology, self.parent_id, self.cfg, self.backends.scorer, self.log
        )
        if self.cfg.thought_mode == THOUGHT_MODE_PASSTHROUGH:
            thought = Thought(
                reasoning="", instruction=self.instruction, declared_edit_count=1
            )
            self.topology.emit("thought_generated", payload={"mode": "passthrough"})
        else:
            ctx = make_context(
                self.checklist,
                parent.evaluation,
                references,
                self.cfg.instruction_volume,
            )
            thought = generate_thought(
                ctx, self.backends.chat, self.cfg, images=[parent.output], log=self.log
            )
            self.topology.emit(
                "thought_generated",
                payload={"mode": "generated", "instruction": thought.instruction},
            )
        edited = self.backends.actor.edit(parent.output, thought.instruction)
        evaluation = evaluate_state(
            self.checklist,
            self.topology.root.output,
            edited,
            self.backends.chat,
            self.backends.embedder,
            self.cfg,
            self.log,
        )
        state_id = append_state(
            self.topology,
            self.parent_id,
            thought=thought.instruction,
            output=edited,
            evaluation=evaluation,
            references=[(e.state_id, e.similarity) for e in references.entries],
            max_children=self.cfg.max_n_children,
        )
        self.topology.emit(
            "state_evaluated",
            state_id=state_id,
            payload={
                "vqa": str(evaluation.vqa_score),
                "clip": evaluation.clip_i,
                "depth": self.topology.states[state_id].depth,
            },
        )

        # (1) topology update and optimal tracking
        self.tracker.add(self.topology, state_id)
        self.topology.emit("optimal_updated", payload=self.tracker.snapshot())

        # (2) budget, strictly before completion
        if self.topology.size >= self.cfg.max_steps:
            self.termination = TERMINATION_BUDGET
            return

        # (3) completion on the tracked optimal
        if self.tracker.eligible:
            best = self.topology.state(self.tracker.eligible[0])
            if check_completion(best.evaluation, best.depth, self.cfg):
                self.termination = TERMINATION_COMPLETED
                return

        # (4) stay constraints for the new state
        passed, failed = check_stay(
            evaluation, parent.evaluation, self.topology.states[state_id].depth, self.cfg
        )
        self.topology.emit(
            "stay_evaluated",
            state_id=state_id,
            payload={"passed": passed, "failed": failed},
        )
        if passed:
            self.parent_id = state_id
            return

        # (5) backtrack
        self._backtrack_from(state_id, forced=False)

    # -- wrap-up -----------------------------------------------------------

    def _finalize(self) -> RunResult:
        if self.accepted is not None:
            final = [self.accepted]
            fallback = not self.tracker.eligible
        else:
            final, fallback = self.tracker.final()
        if not final:
            # Every evaluated state was pruned away; fall back to the newest.
            survivors = [s for s in self.topology.states if s != ROOT_ID]
            final = [max(survivors)] if survivors else [ROOT_ID]
            fallback = True
        for state_id in final:
            for on_chain in chain_of_states(self.topology, state_id):
                self.topology.states[on_chain].status = STATUS_ACTIVATED
        self.topology.emit(
            "run_finished",
            payload={
                "termination": self.termination,
                "final_states": list(final),
                "fallback_used": fallback,
            },
        )
        return RunResult(
            final_states=tuple(final),
            topology=self.topology,
            termination=self.termination,
            fallback_used=fallback,
        )


def run(
    image: ImageRef,
    instruction: str,
    backends: Backends,
    cfg: RunConfig,
    controls: ControlSource | None = None,
    run_tag: str = "",
    clock: Clock | None = None,
    workspace=None,
) -> RunResult:
    """Execute one full search; see the module docstring for the loop shape.

    Backend failures (BackendUnavailable, MalformedAfterRetries) propagate
    to the caller; the topology built so far stays attached to the raised
    error's context for persistence by the harness.
    """
    loop = RunLoop(
        image, instruction, backends, cfg, controls or NoControls(), run_tag, clock, workspace
    )
    return loop.execute()
