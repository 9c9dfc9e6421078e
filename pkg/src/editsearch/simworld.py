"""Deterministic simulated editing universe.

Images are attribute maps instead of pixels: eight named slots, each holding
one categorical value, plus a detail budget that decays by a fixed factor on
every actor call (standing in for the detail lost to repeated encode/decode
round trips). A task asks for C attribute changes; thoughts use the
canonical grammar "set <attr>=<value>; set <attr>=<value>".

All four backend ports have simulated implementations here. Everything is
driven by an explicit 64-bit linear congruential generator or by content
hashes, never by global RNG state, so a run is a pure function of
(task, params, seed, call sequence) on every platform.

The actor's stochastic model:
  * the i-th edit in a call succeeds with marginal probability p**i
    (later edits in a long instruction get less attention);
  * the success draw is, with probability `persistence`, a content hash of
    (seed, attribute, value, input image) rather than a fresh sample -
    re-running the same failed edit on the same image tends to fail the
    same way, so duplicated sibling thoughts waste budget while chains
    (whose inputs change every step) and diversified siblings get fresh
    draws;
  * with probability q one uninstructed attribute is perturbed (collateral
    damage), using fresh per-call randomness.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass

from .errors import SchemaMismatch, UnparseableThought
from .evaluator import Checklist
from .ports import ActorPort, ChatPort, EmbedPort, ScorerPort
from .prompts import ANALYZER_SYSTEM, CHECKER_SYSTEM
from .topology import ImageRef, sim_ref

ATTRIBUTES = ("a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7")
VALUES = ("v0", "v1", "v2", "v3", "v4", "v5")
DETAIL_DECAY = 0.98

_CLAUSE = re.compile(r"set ([A-Za-z_][A-Za-z0-9_]*)=([A-Za-z0-9_]+)")
_QUESTION = re.compile(r"Is ([A-Za-z_][A-Za-z0-9_]*) set to ([A-Za-z0-9_]+)\?")


# ---------------------------------------------------------------------------
# Deterministic randomness
# ---------------------------------------------------------------------------

class Lcg:
    """64-bit linear congruential generator.

    state' = state * 6364136223846793005 + 1442695040888963407 (mod 2**64),
    uniforms taken from the top 53 bits.
    """

    MULT = 6364136223846793005
    INC = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def step(self) -> int:
        self.state = (self.state * self.MULT + self.INC) & self.MASK
        return self.state

    def u01(self) -> float:
        return (self.step() >> 11) / float(1 << 53)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return min(int(self.u01() * n), n - 1)


def hash64(*parts) -> int:
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def hash_u01(*parts) -> float:
    return hash64(*parts) / float(1 << 64)


def rng_for_call(seed: int, call_index: int) -> Lcg:
    return Lcg(hash64("call", seed, call_index))


# ---------------------------------------------------------------------------
# Images and tasks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimImage:
    attributes: tuple[tuple[str, str], ...]
    detail_budget: float = 1.0

    @staticmethod
    def make(mapping: dict[str, str], detail_budget: float = 1.0) -> "SimImage":
        return SimImage(attributes=tuple(sorted(mapping.items())), detail_budget=detail_budget)

    @property
    def attr_map(self) -> dict[str, str]:
        return dict(self.attributes)

    def payload(self) -> str:
        return json.dumps(
            {"attributes": self.attr_map, "detail_budget": self.detail_budget},
            sort_keys=True,
            separators=(",", ":"),
        )

    def to_ref(self) -> ImageRef:
        return sim_ref(self.payload())

    @staticmethod
    def from_ref(ref: ImageRef) -> "SimImage":
        if ref.kind != "sim":
            raise SchemaMismatch(f"expected a sim image ref, got kind {ref.kind!r}")
        try:
            doc = json.loads(ref.locator)
            return SimImage.make(doc["attributes"], doc["detail_budget"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaMismatch(f"bad sim payload: {exc}") from exc


@dataclass(frozen=True)
class SimTask:
    initial: SimImage
    edits: tuple[tuple[str, str], ...]

    def __post_init__(self):
        attrs = [attr for attr, _ in self.edits]
        if len(attrs) != len(set(attrs)):
            raise SchemaMismatch("task edits must touch distinct attributes")
        initial = self.initial.attr_map
        for attr, value in self.edits:
            if attr not in initial:
                raise SchemaMismatch(f"edit targets unknown attribute {attr!r}")
            if initial[attr] == value:
                raise SchemaMismatch(f"edit target equals initial value for {attr!r}")

    @property
    def complexity(self) -> int:
        return len(self.edits)

    def instruction(self) -> str:
        return "; ".join(f"set {attr}={value}" for attr, value in self.edits)

    def to_doc(self) -> dict:
        return {
            "initial": {
                "attributes": self.initial.attr_map,
                "detail_budget": self.initial.detail_budget,
            },
            "edits": [[attr, value] for attr, value in self.edits],
        }

    @staticmethod
    def from_doc(doc: dict) -> "SimTask":
        initial = SimImage.make(doc["initial"]["attributes"], doc["initial"]["detail_budget"])
        return SimTask(initial=initial, edits=tuple((a, v) for a, v in doc["edits"]))


@dataclass(frozen=True)
class SimActorParams:
    p: float = 0.85
    q: float = 0.05
    k: int = 2
    seed: int = 0
    persistence: float = 0.85

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 or not 0.0 <= self.q <= 1.0:
            raise SchemaMismatch("p and q must lie in [0, 1]")
        if not 0.0 <= self.persistence <= 1.0:
            raise SchemaMismatch("persistence must lie in [0, 1]")
        if self.k < 1:
            raise SchemaMismatch("k must be >= 1")


# ---------------------------------------------------------------------------
# Thought grammar
# ---------------------------------------------------------------------------

def parse_edits(thought: str) -> list[tuple[str, str]]:
    """Parse the canonical grammar; raises on any deviation."""
    if not thought:
        raise UnparseableThought("empty thought")
    edits = []
    for clause in thought.split("; "):
        match = _CLAUSE.fullmatch(clause)
        if match is None:
            raise UnparseableThought(f"clause {clause!r} is not 'set <attr>=<value>'")
        edits.append((match.group(1), match.group(2)))
    return edits


# ---------------------------------------------------------------------------
# Actor
# ---------------------------------------------------------------------------

def sim_edit(image: SimImage, thought: str, params: SimActorParams, call_index: int) -> SimImage:
    """Apply one thought to one image; pure given (params, call_index)."""
    edits = parse_edits(thought)
    if len(edits) > params.k:
        raise UnparseableThought(f"{len(edits)} edits exceed the per-call limit {params.k}")
    attrs = image.attr_map
    for attr, _ in edits:
        if attr not in attrs:
            raise SchemaMismatch(f"thought edits unknown attribute {attr!r}")

    rng = rng_for_call(params.seed, call_index)
    input_digest = hashlib.sha256(image.payload().encode("utf-8")).hexdigest()
    for position, (attr, value) in enumerate(edits, start=1):
        marginal = params.p ** position
        if rng.u01() < params.persistence:
            draw = hash_u01("edit", params.seed, attr, value, input_digest)
        else:
            draw = rng.u01()
        if draw < marginal:
            attrs[attr] = value

    if rng.u01() < params.q:
        instructed = {attr for attr, _ in edits}
        bystanders = [a for a in sorted(attrs) if a not in instructed]
        if bystanders:
            victim = bystanders[rng.randint(len(bystanders))]
            alternatives = [v for v in VALUES if v != attrs[victim]]
            attrs[victim] = alternatives[rng.randint(len(alternatives))]

    return SimImage.make(attrs, image.detail_budget * DETAIL_DECAY)


class SimActor(ActorPort):
    """Stateful wrapper advancing the call index across a run."""

    def __init__(self, params: SimActorParams):
        self.params = params
        self.calls = 0

    def edit(self, image: ImageRef, thought: str) -> ImageRef:
        sim_image = SimImage.from_ref(image)
        call_index = self.calls
        self.calls += 1
        return sim_edit(sim_image, thought, self.params, call_index).to_ref()


# ---------------------------------------------------------------------------
# Exact evaluator primitives
# ---------------------------------------------------------------------------

def sim_analyze(task: SimTask) -> Checklist:
    """Exact decomposition: one sub-instruction and one question per edit."""
    subs = tuple(f"set {attr}={value}" for attr, value in task.edits)
    questions = tuple(f"Is {attr} set to {value}?" for attr, value in task.edits)
    description = "The image shows " + ", ".join(
        f"{attr}={value}" for attr, value in task.initial.attributes
    )
    return Checklist(image_description=description, sub_instructions=subs, questions=questions)


def sim_answer(origin: SimImage, edited: SimImage, questions: list[str]) -> list[str]:
    """Exact answers from attribute equality. `origin` fixes the schema."""
    if set(origin.attr_map) != set(edited.attr_map):
        raise SchemaMismatch("origin and edited images disagree on attribute schema")
    attrs = edited.attr_map
    answers = []
    for question in questions:
        match = _QUESTION.fullmatch(question)
        if match is None or match.group(1) not in attrs:
            answers.append("N")
        else:
            answers.append("Y" if attrs[match.group(1)] == match.group(2) else "N")
    return answers


# ---------------------------------------------------------------------------
# Chat backend
# ---------------------------------------------------------------------------

_CHECKLIST_SEGMENT = re.compile(r"\{'Requirement Checklist': (\"(?:[^\"\\]|\\.)*\"),\n'References': \{", re.DOTALL)
_REFERENCE_SEGMENT = re.compile(r"\{'Reference_\d+': (\"(?:[^\"\\]|\\.)*\"), 'CaseSimilarity': (\d+)\},")
_CHECKLIST_ITEM = re.compile(r"(\d+)\.\s(.*?)\s\(([YN])\)(?:,\s|$)")
_QUESTION_ITEM = re.compile(r"\d+\.\s(.*?\?)\s")
_VOLUME_LIMIT = re.compile(r"only do up to (\d+) modifications")


class SimChat(ChatPort):
    """One chat backend serving the analyzer, checker, and generator roles.

    Dispatch is by system prompt. Outputs are raw completions that satisfy
    the corresponding guided-decoding format, newline bytes included, so the
    client-side validation path is exercised exactly as with a live model.

    `flip_eps` > 0 makes the checker flip answers at that rate (keyed by a
    per-instance call counter), for robustness experiments only.
    """

    def __init__(self, flip_eps: float = 0.0, seed: int = 0):
        self.flip_eps = flip_eps
        self.seed = seed
        self.calls = 0

    def chat(
        self,
        system: str,
        user: str,
        images: list[ImageRef],
        guided_regex: str | None = None,
    ) -> str:
        self.calls += 1
        if system == ANALYZER_SYSTEM:
            return self._analyze(user, images)
        if system == CHECKER_SYSTEM:
            return self._check(user, images)
        if system.startswith("You are an image-editing work instructor."):
            return self._generate(system, user)
        raise SchemaMismatch("unrecognized system prompt")

    # -- analyzer ----------------------------------------------------------

    def _analyze(self, instruction: str, images: list[ImageRef]) -> str:
        try:
            edits = parse_edits(instruction)
        except UnparseableThought:
            edits = []
        if images and images[0].kind == "sim":
            shown = SimImage.from_ref(images[0]).attributes
            description = "The image shows " + ", ".join(f"{a}={v}" for a, v in shown)
        else:
            description = "The image shows an unstructured scene"
        if edits:
            subs = "".join(f"{i}. set {a}={v}\n" for i, (a, v) in enumerate(edits, start=1))
            questions = "".join(
                f"{i}. Is {a} set to {v}?\n" for i, (a, v) in enumerate(edits, start=1)
            )
        else:
            subs = f"1. {instruction}\n"
            questions = "1. Is the requested edit applied?\n"
        return (
            "<think></think>"
            f'{{"ImageDescription":"{description}", "SubInstructions":"{subs}"'
            f', "Questions":"{questions}"}}'
        )

    # -- checker -----------------------------------------------------------

    def _check(self, user: str, images: list[ImageRef]) -> str:
        questions = _QUESTION_ITEM.findall(user)
        origin = SimImage.from_ref(images[0])
        edited = SimImage.from_ref(images[1])
        answers = sim_answer(origin, edited, questions)
        if self.flip_eps > 0.0:
            flipped = []
            for question, answer in zip(questions, answers):
                if hash_u01("flip", self.seed, self.calls, question) < self.flip_eps:
                    answer = "N" if answer == "Y" else "Y"
                flipped.append(answer)
            answers = flipped
        body = "".join(
            f"{i}. {q} ({a})\n" for i, (q, a) in enumerate(zip(questions, answers), start=1)
        )
        return f'<think></think>{{"Checklist":"{body}"}}'

    # -- generator ---------------------------------------------------------

    def _generate(self, system: str, user: str) -> str:
        segment = _CHECKLIST_SEGMENT.search(user)
        items: list[tuple[str, str]] = []
        if segment is not None:
            line = json.loads(segment.group(1))
            items = [(q, a) for _, q, a in _CHECKLIST_ITEM.findall(line)]
        referenced_attrs: set[str] = set()
        for raw_thought, _ in _REFERENCE_SEGMENT.findall(user):
            try:
                for attr, _v in parse_edits(json.loads(raw_thought)):
                    referenced_attrs.add(attr)
            except UnparseableThought:
                continue

        iv = self._parse_iv(system)
        unmet = [(q, a) for q, a in items if a == "N"]
        picked: list[tuple[str, str]] = []
        for question, _ in unmet:
            attr_value = self._question_edit(question)
            if attr_value is None or attr_value[0] in referenced_attrs:
                continue
            picked.append(attr_value)
            if len(picked) == iv:
                break
        if len(picked) < iv:
            for question, _ in unmet:
                attr_value = self._question_edit(question)
                if attr_value is None or attr_value in picked:
                    continue
                picked.append(attr_value)
                if len(picked) == iv:
                    break
        if not picked:
            # Nothing unmet: re-affirm the leading requirements.
            for question, _ in items[:iv]:
                attr_value = self._question_edit(question)
                if attr_value is not None:
                    picked.append(attr_value)
        if not picked:
            picked = [("a0", "v0")]

        instruction = "; ".join(f"set {a}={v}" for a, v in picked)
        reasoning = (
            "Step1: read the requirement checklist "
            "Step2: choose unmet items not already covered by references "
            f"Step3: instruct {len(picked)} modifications"
        )
        return f'<think></think>{{"reasoning":"{reasoning}", "instruction":"{instruction}"}}'

    @staticmethod
    def _parse_iv(system: str) -> int:
        match = _VOLUME_LIMIT.search(system)
        return int(match.group(1)) if match else 2

    @staticmethod
    def _question_edit(question: str) -> tuple[str, str] | None:
        match = _QUESTION.fullmatch(question)
        if match is None:
            return None
        return match.group(1), match.group(2)


# ---------------------------------------------------------------------------
# Embedder and scorer
# ---------------------------------------------------------------------------

class SimEmbedder(EmbedPort):
    """One-hot attribute encodings scaled by the detail budget."""

    def embed(self, image: ImageRef) -> list[float]:
        sim_image = SimImage.from_ref(image)
        vector: list[float] = []
        for _, value in sim_image.attributes:
            if value not in VALUES:
                raise SchemaMismatch(f"value {value!r} outside the sim value space")
            for candidate in VALUES:
                vector.append(sim_image.detail_budget if candidate == value else 0.0)
        return vector


class SimScorer(ScorerPort):
    """Normalized attribute Hamming distance, reported on both channels."""

    def distances(self, a: ImageRef, b: ImageRef) -> dict[str, float]:
        image_a = SimImage.from_ref(a)
        image_b = SimImage.from_ref(b)
        map_a, map_b = image_a.attr_map, image_b.attr_map
        if set(map_a) != set(map_b):
            raise SchemaMismatch("images disagree on attribute schema")
        differing = sum(1 for attr in map_a if map_a[attr] != map_b[attr])
        hamming = differing / len(map_a)
        return {"histogram": hamming, "structural": hamming}


# ---------------------------------------------------------------------------
# Task generation
# ---------------------------------------------------------------------------

def gen_task(complexity: int, rng: Lcg) -> SimTask:
    if not 1 <= complexity <= len(ATTRIBUTES):
        raise SchemaMismatch(f"complexity must be in [1, {len(ATTRIBUTES)}]")
    initial = {attr: VALUES[rng.randint(len(VALUES))] for attr in ATTRIBUTES}
    pool = list(ATTRIBUTES)
    chosen = []
    for _ in range(complexity):
        chosen.append(pool.pop(rng.randint(len(pool))))
    edits = []
    for attr in chosen:
        alternatives = [v for v in VALUES if v != initial[attr]]
        edits.append((attr, alternatives[rng.randint(len(alternatives))]))
    return SimTask(initial=SimImage.make(initial), edits=tuple(edits))


def gen_tasks(count: int, complexity: int, seed: int) -> list[SimTask]:
    rng = Lcg(hash64("tasks", seed))
    return [gen_task(complexity, rng) for _ in range(count)]
