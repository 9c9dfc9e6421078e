"""Backend port protocols.

Four narrow interfaces separate the search engine from everything heavy:
the editing model, the multimodal chat model, the embedding model, and the
perceptual distance scorer. Remote HTTP services, the simulated world, and
test stubs all plug in through these.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

from .topology import ImageRef


@runtime_checkable
class ActorPort(Protocol):
    def edit(self, image: ImageRef, thought: str) -> ImageRef:
        """Apply one textual editing instruction, returning the new image."""
        ...


@runtime_checkable
class ChatPort(Protocol):
    def chat(
        self,
        system: str,
        user: str,
        images: list[ImageRef],
        guided_regex: str | None = None,
    ) -> str:
        """One chat completion; returns the raw completion text."""
        ...


@runtime_checkable
class EmbedPort(Protocol):
    def embed(self, image: ImageRef) -> list[float]:
        """Embedding vector for one image."""
        ...


@runtime_checkable
class ScorerPort(Protocol):
    def distances(self, a: ImageRef, b: ImageRef) -> dict[str, float]:
        """Named perceptual distances in [0, 1] for an image pair."""
        ...


@dataclass
class Backends:
    actor: ActorPort
    chat: ChatPort
    embedder: EmbedPort
    scorer: ScorerPort
