"""Engine error hierarchy.

Every error carries a stable machine code used by the CLI (stderr) and the
HTTP service (ApiError bodies). The code set is closed; adding an error type
here means documenting it in docs/http_api.md.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all engine errors."""

    code = "engine_error"

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


# ------------------------------------------------------------------
# corpus
# ------------------------------------------------------------------


class EmptyDocument(EngineError):
    code = "empty_document"


class DecodeFailure(EngineError):
    code = "decode_failure"


class InvalidChunkParams(EngineError):
    code = "invalid_chunk_params"


# ------------------------------------------------------------------
# retrieval
# ------------------------------------------------------------------


class DimensionMismatch(EngineError):
    code = "dimension_mismatch"


class DuplicateChunk(EngineError):
    code = "duplicate_chunk"


class InvalidQuery(EngineError):
    code = "invalid_query"


# ------------------------------------------------------------------
# llm gateway
# ------------------------------------------------------------------


class ProviderError(EngineError):
    """Transport, auth, or rate-limit failure talking to a provider.

    ``retryable`` distinguishes transient failures (retried with backoff)
    from terminal ones (surfaced immediately).
    """

    code = "provider_error"

    def __init__(self, message: str, retryable: bool = False, details: dict | None = None):
        super().__init__(message, details)
        self.retryable = retryable


class Timeout(ProviderError):
    code = "timeout"

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message, retryable=True, details=details)


class MissingBinding(EngineError):
    code = "missing_binding"


class UnknownPlaceholder(EngineError):
    code = "unknown_placeholder"


class SchemaViolation(EngineError):
    code = "schema_violation"


class NoStructuredContent(EngineError):
    code = "no_structured_content"


class UnscriptedPrompt(EngineError):
    code = "unscripted_prompt"


# ------------------------------------------------------------------
# threat agent
# ------------------------------------------------------------------


class EmptyKnowledgeBase(EngineError):
    code = "empty_knowledge_base"


class PendingAnswer(EngineError):
    code = "pending_answer"


class NotPresented(EngineError):
    code = "not_presented"


class EmptyAnswer(EngineError):
    code = "empty_answer"


# ------------------------------------------------------------------
# policy agent
# ------------------------------------------------------------------


class EmptySpecIndex(EngineError):
    code = "empty_spec_index"


class EmptyIsaIndex(EngineError):
    code = "empty_isa_index"


# ------------------------------------------------------------------
# session store
# ------------------------------------------------------------------


class TerminalSession(EngineError):
    code = "terminal_session"


class StorageFailure(EngineError):
    code = "storage_failure"


class UnknownSession(EngineError):
    code = "unknown_session"


class CorruptLog(EngineError):
    code = "corrupt_log"


# ------------------------------------------------------------------
# interface
# ------------------------------------------------------------------


class UsageError(EngineError):
    code = "usage"


class MissingArtifact(EngineError):
    code = "missing_artifact"
