"""Checklist-based evaluation of edited images.

The original multi-instruction is decomposed once per run into a checklist
of yes/no questions. Every state's output image is then scored against the
root image: the checker answers each question N times with majority
aggregation, the instruction-following score is the exact fraction of
affirmative answers, and identity preservation is the embedding cosine.

Scores are rationals, not floats. The complete-following indicator compares
against one exactly, and that comparison must never be float-fragile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .config import RunConfig
from .errors import (
    DimensionMismatch,
    EmptyChecklist,
    EmptyInput,
    FormatViolation,
    MalformedAfterRetries,
)
from .ports import ChatPort, EmbedPort
from .prompts import (
    ANALYZER_FORMAT,
    ANALYZER_SYSTEM,
    CHECKER_FORMAT,
    CHECKER_SYSTEM,
    extract_analyzer,
    extract_checker,
    render_questions,
)
from .topology import ImageRef

EventLog = Callable[[str, dict], None]


def _noop_log(kind: str, payload: dict) -> None:
    return None


@dataclass(frozen=True)
class Checklist:
    image_description: str
    sub_instructions: tuple[str, ...]
    questions: tuple[str, ...]

    def __post_init__(self):
        if len(self.questions) == 0:
            raise EmptyChecklist("checklist needs at least one question")
        if len(self.questions) != len(self.sub_instructions):
            raise FormatViolation(0, "question/sub-instruction count mismatch")
        for question in self.questions:
            if not question.endswith("?"):
                raise FormatViolation(0, f"question without terminal '?': {question!r}")


@dataclass(frozen=True)
class QuestionAnswers:
    repeats: tuple[str, ...]
    final: str


@dataclass(frozen=True)
class AnswerSheet:
    per_question: tuple[QuestionAnswers, ...]


@dataclass(frozen=True)
class Evaluation:
    checklist: Checklist
    answers: AnswerSheet
    vqa_score: Fraction
    clip_i: float
    reasoning: str


# ---------------------------------------------------------------------------
# Checklist construction
# ---------------------------------------------------------------------------

def build_checklist(
    instruction: str,
    origin: ImageRef,
    analyzer: ChatPort,
    cfg: RunConfig,
    log: EventLog = _noop_log,
) -> Checklist:
    """Decompose the instruction into a question checklist, with retries."""
    attempts: list[str] = []
    for attempt in range(cfg.max_n_try):
        raw = analyzer.chat(ANALYZER_SYSTEM, instruction, [origin], ANALYZER_FORMAT)
        attempts.append(raw)
        try:
            description, subs, questions = extract_analyzer(raw)
            checklist = Checklist(
                image_description=description,
                sub_instructions=tuple(subs),
                questions=tuple(questions),
            )
        except (FormatViolation, EmptyChecklist) as exc:
            log("analyzer_retry", {"attempt": attempt + 1, "error": str(exc)})
            continue
        return checklist
    raise MalformedAfterRetries(attempts)


# ---------------------------------------------------------------------------
# Checklist answering
# ---------------------------------------------------------------------------

def answer_checklist(
    origin: ImageRef,
    edited: ImageRef,
    questions: tuple[str, ...],
    checker: ChatPort,
    n_repeats: int,
    max_n_try: int = 3,
    log: EventLog = _noop_log,
) -> AnswerSheet:
    """Query the checker n_repeats times and majority-aggregate per question.

    A repeat whose output stays malformed after max_n_try attempts is
    discarded. Questions left with no surviving repeats, or with a split
    vote, fall back to N: an unverifiable requirement counts as unmet.
    """
    if n_repeats < 1 or n_repeats % 2 == 0:
        raise EmptyInput("n_repeats must be odd and >= 1")
    user_text = render_questions(list(questions))
    survived: list[list[str]] = []
    for repeat in range(n_repeats):
        answers = _one_repeat(origin, edited, questions, checker, user_text, max_n_try, log)
        if answers is None:
            log("repeat_discarded", {"repeat": repeat + 1})
            continue
        survived.append(answers)

    per_question = []
    for index in range(len(questions)):
        repeats = tuple(column[index] for column in survived)
        if not repeats:
            log("answer_fallback", {"question": index + 1})
            final = "N"
        else:
            yes = sum(1 for a in repeats if a == "Y")
            no = len(repeats) - yes
            final = "Y" if yes > no else "N"
        per_question.append(QuestionAnswers(repeats=repeats, final=final))
    return AnswerSheet(per_question=tuple(per_question))


def _one_repeat(
    origin: ImageRef,
    edited: ImageRef,
    questions: tuple[str, ...],
    checker: ChatPort,
    user_text: str,
    max_n_try: int,
    log: EventLog,
) -> list[str] | None:
    for attempt in range(max_n_try):
        raw = checker.chat(CHECKER_SYSTEM, user_text, [origin, edited], CHECKER_FORMAT)
        try:
            items = extract_checker(raw)
        except FormatViolation as exc:
            log("checker_retry", {"attempt": attempt + 1, "error": str(exc)})
            continue
        if len(items) != len(questions):
            # A checker that reports the wrong number of lines is treated
            # exactly like malformed output: retry, then discard.
            log("checker_retry", {"attempt": attempt + 1, "error": "item count mismatch"})
            continue
        return [answer for _, answer in items]
    return None


# ---------------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------------

def vqa_score(answers: AnswerSheet) -> Fraction:
    """Exact fraction of questions whose final answer is Y."""
    total = len(answers.per_question)
    if total == 0:
        raise EmptyChecklist("no questions to score")
    yes = sum(1 for q in answers.per_question if q.final == "Y")
    return Fraction(yes, total)


def cif(scores: list[Fraction]) -> Fraction:
    """Fraction of samples whose score is exactly one."""
    if not scores:
        raise EmptyInput("cif needs at least one score")
    complete = sum(1 for s in scores if s == 1)
    return Fraction(complete, len(scores))


def clip_i(origin: ImageRef, edited: ImageRef, embedder: EmbedPort) -> float:
    """Cosine similarity of the two image embeddings."""
    a = embedder.embed(origin)
    b = embedder.embed(edited)
    if len(a) != len(b):
        raise DimensionMismatch(f"embedding dims {len(a)} vs {len(b)}")
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(y * y for y in b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DimensionMismatch("zero-norm embedding")
    return dot / (norm_a * norm_b)


def evaluate_state(
    checklist: Checklist,
    origin: ImageRef,
    edited: ImageRef,
    checker: ChatPort,
    embedder: EmbedPort,
    cfg: RunConfig,
    log: EventLog = _noop_log,
) -> Evaluation:
    """Full evaluation of one state output against the root image.

    The checklist is the cached per-run decomposition; no analyzer call
    happens here.
    """
    answers = answer_checklist(
        origin, edited, checklist.questions, checker, cfg.n_repeats, cfg.max_n_try, log
    )
    score = vqa_score(answers)
    cosine = clip_i(origin, edited, embedder)
    annotated = "\n".join(
        f"{i}. {q} ({a.final})"
        for i, (q, a) in enumerate(zip(checklist.questions, answers.per_question), start=1)
    )
    return Evaluation(
        checklist=checklist,
        answers=answers,
        vqa_score=score,
        clip_i=cosine,
        reasoning=annotated,
    )
