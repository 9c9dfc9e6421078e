import json
import re
from pathlib import Path

import pytest

from editsearch.errors import FormatViolation
from editsearch.prompts import (
    ANALYZER_FORMAT,
    ANALYZER_PATTERN,
    CHECKER_FORMAT,
    CHECKER_PATTERN,
    GENERATOR_FORMAT,
    GENERATOR_PATTERN,
    extract_analyzer,
    extract_checker,
    extract_generator,
    generator_system,
    match_format,
    render_checklist,
    render_generator_user,
    render_questions,
)

CORPUS = json.loads(
    (Path(__file__).parent / "data" / "guided_corpus.json").read_text(encoding="utf-8")
)
PATTERNS = {
    "generator": GENERATOR_PATTERN,
    "analyzer": ANALYZER_PATTERN,
    "checker": CHECKER_PATTERN,
}


class TestCorpus:
    def test_patterns_stored_bit_exact(self):
        assert CORPUS["patterns"]["generator"] == GENERATOR_FORMAT
        assert CORPUS["patterns"]["analyzer"] == ANALYZER_FORMAT
        assert CORPUS["patterns"]["checker"] == CHECKER_FORMAT

    def test_corpus_shape(self):
        cases = CORPUS["cases"]
        assert len(cases) == 30
        for template in PATTERNS:
            mine = [c for c in cases if c["template"] == template]
            assert len(mine) == 10
            assert sum(c["expect"] for c in mine) == 4

    @pytest.mark.parametrize(
        "case", CORPUS["cases"], ids=[c["note"].replace(" ", "-") for c in CORPUS["cases"]]
    )
    def test_agrees_with_oracle_labels(self, case):
        matched = match_format(case["text"], PATTERNS[case["template"]]) is not None
        assert matched == case["expect"], case["note"]

    def test_match_is_full_anchor(self):
        good = '<think></think>\n{"Checklist":"1. Done? (Y)\n"}'
        assert match_format(good, CHECKER_PATTERN)
        assert match_format(good + " ", CHECKER_PATTERN) is None
        assert match_format(" " + good, CHECKER_PATTERN) is None

    def test_patterns_are_dotall(self):
        for pattern in PATTERNS.values():
            assert pattern.flags & re.DOTALL


class TestExtraction:
    def test_generator_fields(self):
        raw = '<think></think>\n{"reasoning":"Step1: a Step2: b Step3: c", "instruction":"set a0=v1; set a3=v2"}'
        reasoning, instruction = extract_generator(raw)
        assert reasoning == "Step1: a Step2: b Step3: c"
        assert instruction == "set a0=v1; set a3=v2"

    def test_analyzer_fields(self):
        raw = (
            '<think></think>\n{"ImageDescription":"The cat", '
            '"SubInstructions":"1. add hat\n2. tint fur", '
            '"Questions":"1. Is there a hat?\n2. Is the fur tinted?"}'
        )
        description, subs, questions = extract_analyzer(raw)
        assert description == "The cat"
        assert subs == ["add hat", "tint fur"]
        assert questions == ["Is there a hat?", "Is the fur tinted?"]

    def test_checker_items(self):
        raw = '<think></think>\n{"Checklist":"1. Hat on? (Y)\n2. Fur green? (N)\n"}'
        assert extract_checker(raw) == [("Hat on?", "Y"), ("Fur green?", "N")]

    def test_violation_reports_offset(self):
        raw = '<think></think>\n{"reasoning":"Step1: a Step3: c", "instruction":"x"}'
        with pytest.raises(FormatViolation) as err:
            extract_generator(raw)
        offset = err.value.offset
        # the prefix up to the offset is still completable, one char more is not
        assert 0 < offset <= len(raw)

    def test_violation_on_empty_input(self):
        with pytest.raises(FormatViolation) as err:
            extract_checker("")
        assert err.value.offset == 0


class TestRenderers:
    def test_render_checklist(self):
        line = render_checklist(["Is a0 set to v1?", "Is a1 set to v2?"], ["N", "Y"])
        assert line == "1. Is a0 set to v1? (N), 2. Is a1 set to v2? (Y)"

    def test_render_questions(self):
        assert render_questions(["A?", "B?"]) == "1. A? 2. B? "

    def test_generator_system_carries_volume(self):
        text = generator_system(3)
        assert "up to 3 modifications" in text
        assert "up to 2 modifications" in generator_system(2)

    def test_generator_user_layout(self):
        body = render_generator_user("1. A? (N)", [("set a1=v2", 77)])
        lines = body.split("\n")
        assert lines[0] == "{'Requirement Checklist': \"1. A? (N)\","
        assert lines[1] == "'References': {"
        assert lines[2] == "{'Reference_0': \"set a1=v2\", 'CaseSimilarity': 77},"
        assert lines[-1] == "}"

    def test_generator_user_no_references(self):
        body = render_generator_user("1. A? (N)", [])
        assert body.split("\n")[-2:] == ["'References': {", "}"]
