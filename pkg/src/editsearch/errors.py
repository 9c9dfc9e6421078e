"""Exception hierarchy for the editsearch package.

Every error raised by the library derives from EditSearchError so callers can
catch the whole family with one clause. Transport-level failures raised by the
HTTP gateway derive from GatewayError, which the run engine maps onto
BackendUnavailable at its boundary.
"""

from __future__ import annotations


class EditSearchError(Exception):
    """Base class for all library errors."""


# ---------------------------------------------------------------------------
# Topology and serialization
# ---------------------------------------------------------------------------

class EmptyInstruction(EditSearchError):
    pass


class UnresolvableImage(EditSearchError):
    pass


class UnknownParent(EditSearchError):
    pass


class UnknownState(EditSearchError):
    pass


class CapacityExceeded(EditSearchError):
    pass


class OutOfRange(EditSearchError):
    pass


class SchemaViolation(EditSearchError):
    """A persisted document failed validation.

    `path` points at the offending field, e.g. "states[2].parent_id".
    """

    def __init__(self, path: str, message: str = ""):
        self.path = path
        detail = f"{path}: {message}" if message else path
        super().__init__(detail)


# ---------------------------------------------------------------------------
# Retriever / evaluator
# ---------------------------------------------------------------------------

class DistanceOutOfRange(EditSearchError):
    pass


class ScorerUnavailable(EditSearchError):
    pass


class EmptyChecklist(EditSearchError):
    pass


class EmptyInput(EditSearchError):
    pass


class DimensionMismatch(EditSearchError):
    pass


# ---------------------------------------------------------------------------
# Structured generation
# ---------------------------------------------------------------------------

class FormatViolation(EditSearchError):
    """Raw model output does not match the required output format.

    `offset` is the length of the longest prefix of the raw text that could
    still be extended into a conforming string.
    """

    def __init__(self, offset: int, message: str = ""):
        self.offset = offset
        detail = f"first mismatch at offset {offset}"
        if message:
            detail = f"{detail}: {message}"
        super().__init__(detail)


class MalformedAfterRetries(EditSearchError):
    """All format retries were exhausted. Carries every raw attempt."""

    def __init__(self, attempts: list[str]):
        self.attempts = list(attempts)
        super().__init__(f"output malformed after {len(self.attempts)} attempts")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

class ConfigError(EditSearchError):
    """Invalid configuration. `path` names the offending key when known."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvalidComplexity(ConfigError):
    def __init__(self, value):
        super().__init__(f"complexity must be an integer >= 1, got {value!r}")


# ---------------------------------------------------------------------------
# Simulated world
# ---------------------------------------------------------------------------

class UnparseableThought(EditSearchError):
    pass


class SchemaMismatch(EditSearchError):
    pass


# ---------------------------------------------------------------------------
# Gateway / backends
# ---------------------------------------------------------------------------

class GatewayError(EditSearchError):
    """Base class for HTTP transport failures."""


class GatewayTimeout(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class HttpStatusError(GatewayError):
    def __init__(self, code: int, detail: str = ""):
        self.code = code
        super().__init__(f"HTTP {code}" + (f": {detail}" if detail else ""))


class InvalidImagePayload(GatewayError):
    pass


class BackendUnavailable(EditSearchError):
    """A backend port could not serve a request; the run aborts."""


# ---------------------------------------------------------------------------
# Analytics
# ---------------------------------------------------------------------------

class DegenerateInput(EditSearchError):
    pass


class MissingEvaluations(EditSearchError):
    pass
