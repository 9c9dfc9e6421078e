"""Topology persistence: schema "1" documents with canonical JSON encoding.

Round trips must be lossless and byte-stable: deserializing a document and
re-serializing it yields the identical byte sequence. Rational scores are
stored as "p/q" strings so exactness survives the trip; floats rely on
repr-stable encoding.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .errors import SchemaViolation
from .evaluator import AnswerSheet, Checklist, Evaluation, QuestionAnswers
from .topology import (
    EventRecord,
    ImageRef,
    InferenceTopology,
    ReferenceLink,
    State,
    TransitionLink,
)

SCHEMA_VERSION = "1"


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def _fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _image_to_doc(image: ImageRef) -> dict:
    return {"id": image.id, "kind": image.kind, "locator": image.locator}


def _evaluation_to_doc(evaluation: Evaluation | None) -> dict | None:
    if evaluation is None:
        return None
    return {
        "checklist": {
            "image_description": evaluation.checklist.image_description,
            "sub_instructions": list(evaluation.checklist.sub_instructions),
            "questions": list(evaluation.checklist.questions),
        },
        "answers": {
            "per_question": [
                {"repeats": list(q.repeats), "final": q.final}
                for q in evaluation.answers.per_question
            ]
        },
        "vqa_score": _fraction_str(evaluation.vqa_score),
        "clip_i": evaluation.clip_i,
        "reasoning": evaluation.reasoning,
    }


def _state_to_doc(state: State) -> dict:
    return {
        "state_id": state.state_id,
        "parent_id": state.parent_id,
        "depth": state.depth,
        "input": _image_to_doc(state.input),
        "output": _image_to_doc(state.output),
        "thought": state.thought,
        "evaluation": _evaluation_to_doc(state.evaluation),
        "status": state.status,
    }


def topology_to_document(topology: InferenceTopology, config_digest: str) -> dict:
    ordered = sorted(sid for sid in topology.states if sid != 0)
    return {
        "version": SCHEMA_VERSION,
        "config_digest": config_digest,
        "root": _state_to_doc(topology.root),
        "states": [_state_to_doc(topology.states[sid]) for sid in ordered],
        "transitions": [{"from": t.src, "to": t.dst} for t in topology.transitions],
        "references": [
            {"at": r.at, "ref": r.ref, "similarity": r.similarity} for r in topology.references
        ],
        "events": [
            {
                "seq": e.seq,
                "run_id": e.run_id,
                "kind": e.kind,
                "state_id": e.state_id,
                "payload": e.payload,
                "ts": e.ts,
            }
            for e in topology.events
        ],
    }


# ---------------------------------------------------------------------------
# Decoding with path-tracked validation
# ---------------------------------------------------------------------------

def _require(doc: dict, key: str, path: str, kind=None):
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaViolation(f"{path}.{key}" if path else key, "missing")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaViolation(f"{path}.{key}" if path else key, f"expected {kind}")
    return value


def _image_from_doc(doc: dict, path: str) -> ImageRef:
    return ImageRef(
        id=_require(doc, "id", path, str),
        kind=_require(doc, "kind", path, str),
        locator=_require(doc, "locator", path, str),
    )


def _evaluation_from_doc(doc: dict | None, path: str) -> Evaluation | None:
    if doc is None:
        return None
    checklist_doc = _require(doc, "checklist", path, dict)
    try:
        checklist = Checklist(
            image_description=_require(checklist_doc, "image_description", f"{path}.checklist", str),
            sub_instructions=tuple(
                _require(checklist_doc, "sub_instructions", f"{path}.checklist", list)
            ),
            questions=tuple(_require(checklist_doc, "questions", f"{path}.checklist", list)),
        )
    except SchemaViolation:
        raise
    except Exception as exc:
        raise SchemaViolation(f"{path}.checklist", str(exc)) from exc
    answers_doc = _require(doc, "answers", path, dict)
    rows = _require(answers_doc, "per_question", f"{path}.answers", list)
    per_question = []
    for index, row in enumerate(rows):
        row_path = f"{path}.answers.per_question[{index}]"
        per_question.append(
            QuestionAnswers(
                repeats=tuple(_require(row, "repeats", row_path, list)),
                final=_require(row, "final", row_path, str),
            )
        )
    raw_score = _require(doc, "vqa_score", path, str)
    try:
        score = Fraction(raw_score)
    except (ValueError, ZeroDivisionError) as exc:
        raise SchemaViolation(f"{path}.vqa_score", str(exc)) from exc
    return Evaluation(
        checklist=checklist,
        answers=AnswerSheet(per_question=tuple(per_question)),
        vqa_score=score,
        clip_i=_require(doc, "clip_i", path, (int, float)),
        reasoning=_require(doc, "reasoning", path, str),
    )


def _state_from_doc(doc: dict, path: str) -> State:
    parent_id = _require(doc, "parent_id", path)
    if parent_id is not None and not isinstance(parent_id, int):
        raise SchemaViolation(f"{path}.parent_id", "expected integer or null")
    evaluation_doc = _require(doc, "evaluation", path)
    return State(
        state_id=_require(doc, "state_id", path, int),
        parent_id=parent_id,
        depth=_require(doc, "depth", path, int),
        input=_image_from_doc(_require(doc, "input", path, dict), f"{path}.input"),
        output=_image_from_doc(_require(doc, "output", path, dict), f"{path}.output"),
        thought=_require(doc, "thought", path, str),
        evaluation=_evaluation_from_doc(evaluation_doc, f"{path}.evaluation"),
        status=_require(doc, "status", path, str),
    )


def document_to_topology(doc: dict) -> tuple[InferenceTopology, str]:
    """Rebuild a topology from a document; returns (topology, config_digest)."""
    version = _require(doc, "version", "")
    if version != SCHEMA_VERSION:
        raise SchemaViolation("version", f"expected {SCHEMA_VERSION!r}, got {version!r}")
    _require(doc, "config_digest", "", str)
    _require(doc, "root", "", dict)
    for key in ("states", "transitions", "references", "events"):
        _require(doc, key, "", list)

    topology = InferenceTopology()
    root = _state_from_doc(doc["root"], "root")
    topology.states[root.state_id] = root
    for index, state_doc in enumerate(doc["states"]):
        state = _state_from_doc(state_doc, f"states[{index}]")
        topology.states[state.state_id] = state
    for index, link in enumerate(doc["transitions"]):
        topology.transitions.append(
            TransitionLink(
                src=_require(link, "from", f"transitions[{index}]", int),
                dst=_require(link, "to", f"transitions[{index}]", int),
            )
        )
    for index, link in enumerate(doc["references"]):
        topology.references.append(
            ReferenceLink(
                at=_require(link, "at", f"references[{index}]", int),
                ref=_require(link, "ref", f"references[{index}]", int),
                similarity=_require(link, "similarity", f"references[{index}]", int),
            )
        )
    run_id = ""
    for index, event_doc in enumerate(doc["events"]):
        path = f"events[{index}]"
        state_id = _require(event_doc, "state_id", path)
        if state_id is not None and not isinstance(state_id, int):
            raise SchemaViolation(f"{path}.state_id", "expected integer or null")
        record = EventRecord(
            seq=_require(event_doc, "seq", path, int),
            run_id=_require(event_doc, "run_id", path, str),
            kind=_require(event_doc, "kind", path, str),
            state_id=state_id,
            payload=_require(event_doc, "payload", path, dict),
            ts=_require(event_doc, "ts", path, int),
        )
        topology.events.append(record)
        run_id = record.run_id
    topology.run_id = run_id
    return topology, _require(doc, "config_digest", "", str)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def write_document(topology: InferenceTopology, config_digest: str, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(topology_to_document(topology, config_digest)), encoding="utf-8")
    return path


def read_document(path: str | Path) -> tuple[InferenceTopology, str]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation("", f"not valid JSON: {exc}") from exc
    return document_to_topology(doc)
