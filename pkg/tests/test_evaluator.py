from fractions import Fraction

import pytest

from editsearch.config import derive_config
from editsearch.errors import (
    DimensionMismatch,
    EmptyChecklist,
    EmptyInput,
    FormatViolation,
    MalformedAfterRetries,
)
from editsearch.evaluator import (
    AnswerSheet,
    Checklist,
    QuestionAnswers,
    answer_checklist,
    build_checklist,
    cif,
    clip_i,
    evaluate_state,
    vqa_score,
)
from editsearch.simworld import (
    SimActorParams,
    SimChat,
    SimEmbedder,
    SimImage,
    SimTask,
    sim_edit,
)


class ScriptedChat:
    """Replays canned completions in order, recording every call."""

    def __init__(self, outputs):
        self.outputs = list(outputs)
        self.calls = []

    def chat(self, system, user, images, guided_regex=None):
        self.calls.append((system, user, len(images), guided_regex))
        return self.outputs.pop(0)


def checker_raw(answers):
    body = "".join(f"{i}. Q{i}? ({a})\n" for i, a in enumerate(answers, start=1))
    return '<think></think>\n{"Checklist":"%s"}' % body


def image_all(value="v0"):
    return SimImage.make({f"a{i}": value for i in range(8)})


class TestChecklistType:
    def test_empty_rejected(self):
        with pytest.raises(EmptyChecklist):
            Checklist(image_description="The x", sub_instructions=(), questions=())

    def test_count_mismatch(self):
        with pytest.raises(FormatViolation):
            Checklist("The x", ("a", "b"), ("Is a done?",))

    def test_question_mark_required(self):
        with pytest.raises(FormatViolation):
            Checklist("The x", ("a",), ("no mark",))


class TestBuildChecklist:
    def test_happy_path_through_sim_analyzer(self):
        task = SimTask(initial=image_all(), edits=(("a0", "v1"), ("a4", "v2")))
        cfg = derive_config(2)
        checklist = build_checklist(task.instruction(), task.initial.to_ref(), SimChat(), cfg)
        assert checklist.questions == ("Is a0 set to v1?", "Is a4 set to v2?")

    def test_retry_then_success(self):
        good = (
            '<think></think>\n{"ImageDescription":"The x", '
            '"SubInstructions":"1. set a0=v1\n", "Questions":"1. Is a0 set to v1?\n"}'
        )
        chat = ScriptedChat(["garbage", good])
        retries = []
        checklist = build_checklist(
            "set a0=v1",
            image_all().to_ref(),
            chat,
            derive_config(1),
            log=lambda kind, payload: retries.append(kind),
        )
        assert checklist.questions == ("Is a0 set to v1?",)
        assert retries == ["analyzer_retry"]

    def test_exhausted_retries(self):
        chat = ScriptedChat(["bad", "bad", "bad"])
        with pytest.raises(MalformedAfterRetries) as err:
            build_checklist("set a0=v1", image_all().to_ref(), chat, derive_config(1))
        assert len(err.value.attempts) == 3


class TestAnswerChecklist:
    def ask(self, outputs, n_repeats=3, questions=("Q1?", "Q2?")):
        chat = ScriptedChat(outputs)
        ref = image_all().to_ref()
        return answer_checklist(ref, ref, tuple(questions), chat, n_repeats), chat

    def test_majority_vote(self):
        sheet, _ = self.ask(
            [checker_raw("YN"), checker_raw("YY"), checker_raw("NN")]
        )
        assert sheet.per_question[0].final == "Y"
        assert sheet.per_question[1].final == "N"
        assert sheet.per_question[0].repeats == ("Y", "Y", "N")

    def test_even_repeats_rejected(self):
        with pytest.raises(EmptyInput):
            self.ask([], n_repeats=2)

    def test_malformed_repeat_discarded(self):
        outputs = [
            "junk", "junk", "junk",          # repeat 1 burns all 3 tries
            checker_raw("YY"),                # repeat 2
            checker_raw("YN"),                # repeat 3
        ]
        sheet, chat = self.ask(outputs)
        assert sheet.per_question[0].repeats == ("Y", "Y")
        assert sheet.per_question[0].final == "Y"
        # tie across surviving repeats falls to N
        assert sheet.per_question[1].repeats == ("Y", "N")
        assert sheet.per_question[1].final == "N"

    def test_wrong_item_count_is_retried(self):
        outputs = [checker_raw("Y"), checker_raw("YY"), checker_raw("YY"), checker_raw("YY")]
        sheet, _ = self.ask(outputs)
        assert sheet.per_question[0].final == "Y"

    def test_all_repeats_lost_falls_back_to_no(self):
        outputs = ["x"] * 9
        sheet, _ = self.ask(outputs)
        assert [q.final for q in sheet.per_question] == ["N", "N"]
        assert sheet.per_question[0].repeats == ()


class TestScores:
    def test_vqa_exact_fraction(self):
        sheet = AnswerSheet(
            per_question=(
                QuestionAnswers(("Y",), "Y"),
                QuestionAnswers(("N",), "N"),
                QuestionAnswers(("Y",), "Y"),
            )
        )
        assert vqa_score(sheet) == Fraction(2, 3)

    def test_vqa_empty_rejected(self):
        with pytest.raises(EmptyChecklist):
            vqa_score(AnswerSheet(per_question=()))

    def test_cif_exact_equality(self):
        scores = [Fraction(1), Fraction(9999, 10000), Fraction(1)]
        assert cif(scores) == Fraction(2, 3)
        with pytest.raises(EmptyInput):
            cif([])

    def test_clip_i_cosine(self):
        class TwoVec:
            def __init__(self):
                self.table = {}

            def embed(self, ref):
                return self.table[ref.locator]

        embedder = TwoVec()
        a = SimImage.make({"a0": "v0"}).to_ref()
        b = SimImage.make({"a0": "v1"}).to_ref()
        embedder.table = {a.locator: [1.0, 0.0], b.locator: [1.0, 1.0]}
        assert clip_i(a, b, embedder) == pytest.approx(2 ** -0.5)

    def test_clip_i_dim_mismatch(self):
        class Bad:
            def embed(self, ref):
                return [1.0] * (2 if ref.locator.endswith("1") else 3)

        from editsearch.topology import ImageRef

        a = ImageRef(id="a", kind="sim", locator="{}1")
        b = ImageRef(id="b", kind="sim", locator="{}2")
        with pytest.raises(DimensionMismatch):
            clip_i(a, b, Bad())

    def test_clip_i_zero_norm(self):
        class Zero:
            def embed(self, ref):
                return [0.0, 0.0]

        ref = SimImage.make({"a0": "v0"}).to_ref()
        with pytest.raises(DimensionMismatch):
            clip_i(ref, ref, Zero())


class TestEvaluateState:
    def test_full_evaluation_in_sim(self):
        task = SimTask(initial=image_all(), edits=(("a0", "v1"), ("a1", "v2")))
        cfg = derive_config(2)
        checklist = build_checklist(task.instruction(), task.initial.to_ref(), SimChat(), cfg)
        edited = sim_edit(
            task.initial, "set a0=v1", SimActorParams(p=1.0, q=0.0, k=2), 0
        )
        evaluation = evaluate_state(
            checklist,
            task.initial.to_ref(),
            edited.to_ref(),
            SimChat(),
            SimEmbedder(),
            cfg,
        )
        assert evaluation.vqa_score == Fraction(1, 2)
        assert evaluation.clip_i == pytest.approx(7 / 8)
        assert "(Y)" in evaluation.reasoning and "(N)" in evaluation.reasoning
