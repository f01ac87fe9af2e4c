"""Exception hierarchy shared across the pipeline.

Every failure is explicit: no operation fabricates an answer on an error
path. Errors that the CLI maps to distinct exit codes live here.
"""


class ChimeError(Exception):
    """Base class for all package errors."""


class InvalidInputError(ChimeError):
    """A caller violated an operation's precondition."""


class BackendError(ChimeError):
    """Chat/embedding provider failed (transport, HTTP status, bad payload)."""

    retriable = True


class MissingScriptError(BackendError):
    """Scripted backend has no entry for the request fingerprint."""

    retriable = False


class InvalidQueryError(ChimeError):
    """Structured query references an unknown field or operator."""


class PlanningError(ChimeError):
    """Natural-language question could not be planned into a structured query."""


class EmptyCorpusError(ChimeError):
    """Retrieval was asked to run against an empty store."""


class StoreError(ChimeError):
    """Persistent store I/O failure."""


class IngestError(ChimeError):
    """Issue ingestion failed."""


class AuthError(IngestError):
    """Upstream rejected our credentials."""


class RepoNotFoundError(IngestError):
    """Requested repository does not exist upstream."""


class RateLimitExhaustedError(IngestError):
    """Upstream rate limit was not lifted within the retry budget."""
