"""HTTP implementations of the four backend ports.

Transport concerns live here and nowhere else: auth headers, timeouts,
bounded retries with exponential backoff, and a transcript of request and
response digests. Format-level retries (MaxNTry) belong to the callers;
this layer only retries transport failures and 5xx/429 responses, so a
successful edit is never silently duplicated.

A tape mode wraps any port set: record mode captures responses keyed by a
canonical request digest, replay mode serves them back without a network.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import time
from dataclasses import dataclass, field

import requests

from .errors import (
    BackendUnavailable,
    GatewayTimeout,
    HttpStatusError,
    InvalidImagePayload,
    TransportError,
)
from .ports import ActorPort, ChatPort, EmbedPort, ScorerPort
from .topology import IMAGE_KIND_SIM, ImageRef
from .workspace import Workspace


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    token_env: str = ""
    model: str = ""
    timeout_s: float = 120.0
    max_retries: int = 2
    backoff_ms: int = 250

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class TranscriptRecord:
    port: str
    request_digest: str
    response_digest: str
    latency_ms: float
    attempt: int


@dataclass
class Transcript:
    records: list[TranscriptRecord] = field(default_factory=list)

    def append(self, record: TranscriptRecord) -> None:
        self.records.append(record)


def _digest(payload) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _headers(endpoint: EndpointConfig) -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    if endpoint.token_env:
        token = os.environ.get(endpoint.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
    return headers


def _post_json(
    endpoint: EndpointConfig,
    path: str,
    body: dict,
    port: str,
    transcript: Transcript | None,
) -> dict:
    url = endpoint.base_url.rstrip("/") + path
    request_digest = _digest(body)
    last_error: Exception | None = None
    for attempt in range(endpoint.max_retries + 1):
        if attempt > 0:
            time.sleep(endpoint.backoff_ms * (2 ** (attempt - 1)) / 1000.0)
        started = time.monotonic()
        try:
            response = requests.post(
                url, json=body, headers=_headers(endpoint), timeout=endpoint.timeout_s
            )
        except requests.Timeout as exc:
            last_error = GatewayTimeout(f"{port}: timeout after {endpoint.timeout_s}s")
            last_error.__cause__ = exc
            continue
        except requests.RequestException as exc:
            last_error = TransportError(f"{port}: {exc}")
            last_error.__cause__ = exc
            continue
        latency_ms = (time.monotonic() - started) * 1000.0
        if transcript is not None:
            transcript.append(
                TranscriptRecord(
                    port=port,
                    request_digest=request_digest,
                    response_digest=hashlib.sha256(response.content).hexdigest(),
                    latency_ms=latency_ms,
                    attempt=attempt + 1,
                )
            )
        if response.status_code in (429,) or response.status_code >= 500:
            last_error = HttpStatusError(response.status_code, response.text[:500])
            continue
        if response.status_code != 200:
            raise HttpStatusError(response.status_code, response.text[:500])
        try:
            return response.json()
        except ValueError as exc:
            raise TransportError(f"{port}: non-JSON 200 response") from exc
    raise last_error if last_error is not None else BackendUnavailable(port)


def _image_part(image: ImageRef, workspace: Workspace | None) -> dict:
    if image.kind == IMAGE_KIND_SIM:
        return {"type": "text", "text": image.locator}
    if workspace is None:
        raise InvalidImagePayload("file image without a workspace to read it from")
    encoded = base64.b64encode(workspace.load_bytes(image)).decode("ascii")
    return {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{encoded}"}}


def _image_b64(image: ImageRef, workspace: Workspace | None) -> str:
    if image.kind == IMAGE_KIND_SIM:
        return base64.b64encode(image.locator.encode("utf-8")).decode("ascii")
    if workspace is None:
        raise InvalidImagePayload("file image without a workspace to read it from")
    return base64.b64encode(workspace.load_bytes(image)).decode("ascii")


class HttpChat(ChatPort):
    """OpenAI-compatible chat completions; guided-decoding regex forwarded
    as a vendor extension the server may honor or ignore."""

    def __init__(
        self,
        endpoint: EndpointConfig,
        workspace: Workspace | None = None,
        transcript: Transcript | None = None,
    ):
        self.endpoint = endpoint
        self.workspace = workspace
        self.transcript = transcript

    def chat(
        self,
        system: str,
        user: str,
        images: list[ImageRef],
        guided_regex: str | None = None,
    ) -> str:
        content: list[dict] = [{"type": "text", "text": user}]
        content.extend(_image_part(image, self.workspace) for image in images)
        body: dict = {
            "model": self.endpoint.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": content},
            ],
        }
        if guided_regex is not None:
            body["guided_regex"] = guided_regex
        doc = _post_json(self.endpoint, "/v1/chat/completions", body, "chat", self.transcript)
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"chat: malformed completion body: {exc}") from exc


class HttpActor(ActorPort):
    def __init__(
        self,
        endpoint: EndpointConfig,
        workspace: Workspace,
        transcript: Transcript | None = None,
    ):
        self.endpoint = endpoint
        self.workspace = workspace
        self.transcript = transcript

    def edit(self, image: ImageRef, thought: str) -> ImageRef:
        body = {"image_b64": _image_b64(image, self.workspace), "prompt": thought}
        doc = _post_json(self.endpoint, "/edit", body, "actor", self.transcript)
        encoded = doc.get("image_b64", "")
        if not encoded:
            raise InvalidImagePayload("actor returned an empty image")
        try:
            data = base64.b64decode(encoded, validate=True)
        except Exception as exc:
            raise InvalidImagePayload(f"actor returned undecodable base64: {exc}") from exc
        if not data:
            raise InvalidImagePayload("actor returned an empty image")
        return self.workspace.put_bytes(data)


class HttpEmbedder(EmbedPort):
    def __init__(
        self,
        endpoint: EndpointConfig,
        workspace: Workspace | None = None,
        transcript: Transcript | None = None,
    ):
        self.endpoint = endpoint
        self.workspace = workspace
        self.transcript = transcript

    def embed(self, image: ImageRef) -> list[float]:
        body = {"image_b64": _image_b64(image, self.workspace)}
        doc = _post_json(self.endpoint, "/embed", body, "embed", self.transcript)
        embedding = doc.get("embedding")
        if not isinstance(embedding, list) or not embedding:
            raise TransportError("embed: response carries no embedding")
        return [float(x) for x in embedding]


class HttpScorer(ScorerPort):
    def __init__(
        self,
        endpoint: EndpointConfig,
        workspace: Workspace | None = None,
        transcript: Transcript | None = None,
    ):
        self.endpoint = endpoint
        self.workspace = workspace
        self.transcript = transcript

    def distances(self, a: ImageRef, b: ImageRef) -> dict[str, float]:
        body = {
            "image_a_b64": _image_b64(a, self.workspace),
            "image_b_b64": _image_b64(b, self.workspace),
        }
        doc = _post_json(self.endpoint, "/distance", body, "scorer", self.transcript)
        distances = doc.get("distances")
        if not isinstance(distances, dict) or not distances:
            raise TransportError("scorer: response carries no distances")
        return {str(name): float(value) for name, value in distances.items()}


# ---------------------------------------------------------------------------
# Tape mode: record and replay without a network
# ---------------------------------------------------------------------------

class Tape:
    """Digest-keyed response store shared by the four tape ports."""

    def __init__(self, entries: dict[str, object] | None = None):
        self.entries: dict[str, object] = dict(entries or {})

    @staticmethod
    def key(port: str, payload) -> str:
        return f"{port}:{_digest(payload)}"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.entries, fh, sort_keys=True, indent=1)

    @staticmethod
    def load(path) -> "Tape":
        with open(path, encoding="utf-8") as fh:
            return Tape(json.load(fh))


class TapeChat(ChatPort):
    """Record mode wraps a live port; replay mode (inner=None) is network-free."""

    def __init__(self, tape: Tape, inner: ChatPort | None = None):
        self.tape = tape
        self.inner = inner

    def chat(self, system, user, images, guided_regex=None) -> str:
        key = Tape.key(
            "chat",
            {
                "system": system,
                "user": user,
                "images": [image.id for image in images],
                "guided_regex": guided_regex,
            },
        )
        if self.inner is not None:
            response = self.inner.chat(system, user, images, guided_regex)
            self.tape.entries[key] = response
            return response
        if key not in self.tape.entries:
            raise BackendUnavailable(f"tape miss for {key}")
        return str(self.tape.entries[key])


class TapeActor(ActorPort):
    def __init__(self, tape: Tape, inner: ActorPort | None = None):
        self.tape = tape
        self.inner = inner

    def edit(self, image: ImageRef, thought: str) -> ImageRef:
        key = Tape.key("actor", {"image": image.id, "thought": thought})
        if self.inner is not None:
            ref = self.inner.edit(image, thought)
            self.tape.entries[key] = {"id": ref.id, "kind": ref.kind, "locator": ref.locator}
            return ref
        if key not in self.tape.entries:
            raise BackendUnavailable(f"tape miss for {key}")
        stored = dict(self.tape.entries[key])
        return ImageRef(id=stored["id"], kind=stored["kind"], locator=stored["locator"])


class TapeEmbedder(EmbedPort):
    def __init__(self, tape: Tape, inner: EmbedPort | None = None):
        self.tape = tape
        self.inner = inner

    def embed(self, image: ImageRef) -> list[float]:
        key = Tape.key("embed", {"image": image.id})
        if self.inner is not None:
            response = self.inner.embed(image)
            self.tape.entries[key] = response
            return response
        if key not in self.tape.entries:
            raise BackendUnavailable(f"tape miss for {key}")
        return [float(x) for x in self.tape.entries[key]]


class TapeScorer(ScorerPort):
    def __init__(self, tape: Tape, inner: ScorerPort | None = None):
        self.tape = tape
        self.inner = inner

    def distances(self, a: ImageRef, b: ImageRef) -> dict[str, float]:
        key = Tape.key("scorer", {"a": a.id, "b": b.id})
        if self.inner is not None:
            response = self.inner.distances(a, b)
            self.tape.entries[key] = response
            return response
        if key not in self.tape.entries:
            raise BackendUnavailable(f"tape miss for {key}")
        return {str(k): float(v) for k, v in dict(self.tape.entries[key]).items()}
