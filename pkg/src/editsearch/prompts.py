"""Prompt templates and structured-output formats for the instructor backends.

The three output formats below are enforced twice: forwarded to backends that
support guided decoding, and re-checked client-side with an anchored full
match. Guided decoding emits raw newline bytes inside the JSON-ish strings,
so the compiled patterns use DOTALL; the pattern text itself must stay
byte-identical to what is sent over the wire.

Template rendering is pure and byte-stable: identical inputs always produce
identical prompt bytes. The simulated chat backend parses these same
renderings, so any format change must keep both sides in sync.
"""

from __future__ import annotations

import json
import re

# ---------------------------------------------------------------------------
# Guided-decoding output formats (do not edit; matched bit-exact)
# ---------------------------------------------------------------------------

GENERATOR_FORMAT = r"""<think></think>\n?\{"reasoning":"Step1:.*?Step2:.*?Step3:.*?", ?"instruction":".*?"\}"""

ANALYZER_FORMAT = r"""<think></think>\n?\{"ImageDescription":"The.*?", "SubInstructions":"1\..*\n.*?"\, "Questions":"1\..*\?\n.*?"\}"""

CHECKER_FORMAT = r"""<think></think>\n?\{"Checklist":"(?:\d+\..*?\s\((?:Y|N)\)\n)+"\}"""

GENERATOR_PATTERN = re.compile(GENERATOR_FORMAT, re.DOTALL)
ANALYZER_PATTERN = re.compile(ANALYZER_FORMAT, re.DOTALL)
CHECKER_PATTERN = re.compile(CHECKER_FORMAT, re.DOTALL)

# Grouped twins of the patterns above, used only to pull fields out of text
# that already passed the anchored match. Structure must mirror the originals
# exactly so the match boundaries are identical.
_GENERATOR_EXTRACT = re.compile(
    r"""<think></think>\n?\{"reasoning":"(Step1:.*?Step2:.*?Step3:.*?)", ?"instruction":"(.*?)"\}""",
    re.DOTALL,
)
_ANALYZER_EXTRACT = re.compile(
    r"""<think></think>\n?\{"ImageDescription":"(The.*?)", "SubInstructions":"(1\..*\n.*?)"\, "Questions":"(1\..*\?\n.*?)"\}""",
    re.DOTALL,
)
_CHECKER_EXTRACT = re.compile(
    r"""<think></think>\n?\{"Checklist":"((?:\d+\..*?\s\((?:Y|N)\)\n)+)"\}""",
    re.DOTALL,
)

_CHECKER_ITEM = re.compile(r"\d+\.(.*?)\s\(([YN])\)\n", re.DOTALL)
_INDEX_PREFIX = re.compile(r"^\s*\d+\.\s?")


# ---------------------------------------------------------------------------
# System prompts
# ---------------------------------------------------------------------------

GENERATOR_SYSTEM_TEMPLATE = (
    "You are an image-editing work instructor. The user wishes to edit an image "
    "to meet some editing requirements. A requirement checklist is provided. "
    "Your task is to generate an instruction that only do up to {iv} "
    'modifications to the "latest_image". Even it cannot fullfill all the '
    "requirements."
)

ANALYZER_SYSTEM = """You are an image editing task assistant. The user will provide you with an image and an editing instruction.
Three tasks: 1.Describe the image 2.Analyze the editing instruction. Based on the original image content, decompose the instruction into smaller sub instructions. 3.Transform each sub instruction into a question to check whether they are done or not.
Strictly provide your evaluation in a dict format. For example: {"ImageDescription":"Description here.", "SubInstructions": "List sub instructions here.", "Questions": "List questions here."}.
IMPORTANT: Provide the sub instructions one by one, indexed by numbers, split by line break. e.g. 1.xxx\\n 2.xxx\\n ...
IMPORTANT: Provide the questions one by one, end with question mark, indexed by numbers, split by line break. e.g. 1.xxx?\\n 2.xxx?\\n ...
IMPORTANT: If the instruction is simple enough and cannot be decomposed even further, give "SubInstructions" that have only one item."""

CHECKER_SYSTEM = """You are an image editing task assistant. The user will provide you with an original image, an edited image and a checklist of editing questions.
Your tasks: Compare the content of the two images, answer each question in the checklist.
Strictly provide your evaluation in a dict format. For example: {"Checklist":"Output here."}.
IMPORTANT: Answer Y or N for each question, do not include extra output. e.g. 1.xxx (Y), 2.xxx (N), 3.xxx (Y), ..."""


def generator_system(iv: int) -> str:
    return GENERATOR_SYSTEM_TEMPLATE.format(iv=int(iv))


# ---------------------------------------------------------------------------
# User-prompt rendering
# ---------------------------------------------------------------------------

def render_checklist(questions: list[str], answers: list[str]) -> str:
    """One-line checklist with parenthesized answers: 1. Q? (N), 2. Q? (Y)"""
    if len(questions) != len(answers):
        raise ValueError("questions and answers must align")
    return ", ".join(
        f"{i}. {q} ({a})" for i, (q, a) in enumerate(zip(questions, answers), start=1)
    )


def render_generator_user(checklist_line: str, references: list[tuple[str, int]]) -> str:
    # The unbalanced outer brace is intentional: the instructor model was
    # tuned against this exact shape, trailing dangle included.
    lines = ["{'Requirement Checklist': " + json.dumps(checklist_line) + ",", "'References': {"]
    for index, (thought, similarity) in enumerate(references):
        lines.append(
            "{'Reference_%d': %s, 'CaseSimilarity': %d}," % (index, json.dumps(thought), similarity)
        )
    lines.append("}")
    return "\n".join(lines)


def render_questions(questions: list[str]) -> str:
    """Question list for the checker: "1. Q? 2. Q? " with a trailing space."""
    return "".join(f"{i}. {q} " for i, q in enumerate(questions, start=1))


# ---------------------------------------------------------------------------
# Validation and extraction
# ---------------------------------------------------------------------------

def _mismatch_offset(raw: str, pattern_text: str) -> int:
    """Longest prefix of raw that could still extend into a full match."""
    try:
        import regex as regex_mod
    except ImportError:  # pragma: no cover - regex is a declared dependency
        return 0
    compiled = regex_mod.compile(pattern_text, regex_mod.DOTALL)
    lo = 0
    for end in range(len(raw) + 1):
        if compiled.fullmatch(raw, 0, end, partial=True):
            lo = end
        else:
            break
    return lo


def match_format(raw: str, pattern: re.Pattern) -> re.Match | None:
    """Anchored full match; partial matches are rejected."""
    return pattern.fullmatch(raw)


def extract_generator(raw: str) -> tuple[str, str]:
    """(reasoning, instruction) from a conforming generator completion."""
    match = _GENERATOR_EXTRACT.fullmatch(raw)
    if match is None:
        from .errors import FormatViolation

        raise FormatViolation(_mismatch_offset(raw, GENERATOR_FORMAT))
    return match.group(1), match.group(2)


def extract_analyzer(raw: str) -> tuple[str, list[str], list[str]]:
    """(description, sub_instructions, questions) from an analyzer completion."""
    match = _ANALYZER_EXTRACT.fullmatch(raw)
    if match is None:
        from .errors import FormatViolation

        raise FormatViolation(_mismatch_offset(raw, ANALYZER_FORMAT))
    description = match.group(1)
    subs = _split_numbered(match.group(2))
    questions = _split_numbered(match.group(3))
    return description, subs, questions


def extract_checker(raw: str) -> list[tuple[str, str]]:
    """Ordered (item_text, answer) pairs from a checker completion."""
    match = _CHECKER_EXTRACT.fullmatch(raw)
    if match is None:
        from .errors import FormatViolation

        raise FormatViolation(_mismatch_offset(raw, CHECKER_FORMAT))
    return [(text.strip(), answer) for text, answer in _CHECKER_ITEM.findall(match.group(1))]


def _split_numbered(block: str) -> list[str]:
    items = []
    for line in block.split("\n"):
        line = line.strip()
        if not line:
            continue
        items.append(_INDEX_PREFIX.sub("", line))
    return items
