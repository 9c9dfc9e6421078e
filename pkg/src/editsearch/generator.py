"""Thought generation for state expansion.

A thought is one instructor turn: structured reasoning plus an editing
instruction covering at most IV of the unmet requirements. Prompt assembly
is pure; the chat call is bounded by a retry budget and every attempt is
validated against the instructor output format before use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Sequence

from .config import RunConfig
from .errors import FormatViolation, MalformedAfterRetries
from .evaluator import Checklist, Evaluation
from .ports import ChatPort
from .prompts import (
    GENERATOR_FORMAT,
    extract_generator,
    generator_system,
    render_checklist,
    render_generator_user,
)
from .retriever import ReferenceSet
from .topology import ImageRef

EventLog = Callable[[str, dict], None]


def _noop_log(kind: str, payload: dict) -> None:
    pass


_NUMBERED_CLAUSE = re.compile(r"\b\d+\.")


@dataclass(frozen=True)
class Thought:
    reasoning: str
    instruction: str
    declared_edit_count: int


@dataclass(frozen=True)
class GenerationContext:
    checklist_with_answers: str
    references: ReferenceSet
    iv: int


def make_context(
    checklist: Checklist,
    evaluation: Evaluation | None,
    references: ReferenceSet,
    iv: int,
) -> GenerationContext:
    """Render the parent's requirement status; no evaluation means all unmet."""
    questions = list(checklist.questions)
    if evaluation is None:
        answers = ["N"] * len(questions)
    else:
        answers = [qa.final for qa in evaluation.answers.per_question]
    return GenerationContext(
        checklist_with_answers=render_checklist(questions, answers),
        references=references,
        iv=iv,
    )


def assemble_prompts(ctx: GenerationContext) -> tuple[str, str]:
    system = generator_system(ctx.iv)
    user = render_generator_user(ctx.checklist_with_answers, ctx.references.pairs())
    return system, user


def validate_thought(raw: str) -> Thought:
    """Anchored-format check plus field extraction.

    The declared edit count is advisory: numbered clauses when the
    instruction carries them, else one.
    """
    reasoning, instruction = extract_generator(raw)
    if not instruction:
        raise FormatViolation(
            raw.rfind('"instruction":"') + len('"instruction":"'),
            "instruction field is empty",
        )
    declared = len(_NUMBERED_CLAUSE.findall(instruction))
    return Thought(
        reasoning=reasoning,
        instruction=instruction,
        declared_edit_count=declared if declared >= 1 else 1,
    )


def generate_thought(
    ctx: GenerationContext,
    chat: ChatPort,
    cfg: RunConfig,
    images: Sequence[ImageRef] = (),
    log: EventLog = _noop_log,
) -> Thought:
    """Up to max_n_try chat attempts; first conforming completion wins."""
    system, user = assemble_prompts(ctx)
    attempts: list[str] = []
    for attempt in range(1, cfg.max_n_try + 1):
        raw = chat.chat(system, user, list(images), guided_regex=GENERATOR_FORMAT)
        attempts.append(raw)
        try:
            thought = validate_thought(raw)
        except FormatViolation as exc:
            log("thought_malformed", {"attempt": attempt, "offset": exc.offset})
            continue
        if attempt > 1:
            log("thought_retry_succeeded", {"attempt": attempt})
        return thought
    raise MalformedAfterRetries(attempts)
