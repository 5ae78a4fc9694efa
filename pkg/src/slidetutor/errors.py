"""Exception types shared across the package."""


class SlidetutorError(Exception):
    """Base class for every error this package raises on purpose."""


# --- slide ingestion ---------------------------------------------------------

class MalformedArchive(SlidetutorError):
    """Input is not a readable slide archive."""


class EmptyDeck(SlidetutorError):
    """Archive parsed fine but contains zero slides."""


class RendererFailed(SlidetutorError):
    """External page renderer exited abnormally or produced bad output."""


class PageCountMismatch(SlidetutorError):
    """Renderer emitted a different number of page images than the deck has."""


class NotRasterized(SlidetutorError):
    """Operation needs page images that have not been produced yet."""


# --- agenda building ---------------------------------------------------------

class MalformedOutline(SlidetutorError):
    """Outline text cannot be parsed into a tree."""


class InvalidRevision(SlidetutorError):
    """Model's outline revision breaks the incremental-update contract."""


class UnknownNode(SlidetutorError):
    """Referenced node id does not exist in the agenda."""


# --- action planning ---------------------------------------------------------

class NotALeaf(SlidetutorError):
    """Operation requires a page leaf node."""


class NoValidQuestions(SlidetutorError):
    """Every parsed question block failed validation."""


class InvariantViolation(SlidetutorError):
    """Action queue no longer satisfies its ordering or payload rules."""


class BadPosition(SlidetutorError):
    """Queue edit references a position that does not exist."""


class StaleRevision(SlidetutorError):
    """Queue was modified concurrently; caller holds an outdated revision."""


class UnknownActionKind(SlidetutorError):
    """Action kind has no registered controller."""


# --- model gateway -----------------------------------------------------------

class GatewayError(SlidetutorError):
    """Base class for model-gateway failures."""


class InvalidRequest(GatewayError):
    """Request violates the gateway's message or image rules."""


class TransientBackendError(GatewayError):
    """Retryable backend failure: connection trouble or a 5xx answer."""


class Timeout(TransientBackendError):
    """A single backend round-trip exceeded its deadline."""


class BackendRejected(GatewayError):
    """Backend answered with a non-retryable refusal."""


class RetriesExhausted(GatewayError):
    """All retry attempts failed with transient errors."""


class FixtureExhausted(GatewayError):
    """Scripted backend ran out of prepared responses."""


class AssertionFailed(GatewayError):
    """A scripted-backend request assertion did not hold."""


class EmptyCompletion(SlidetutorError):
    """Model returned no usable text."""


# --- sessions and service ----------------------------------------------------

class NoQueue(SlidetutorError):
    """Lecture has no compiled action queue yet."""


class NoPendingStep(SlidetutorError):
    """run_step called while the session has nothing scheduled."""


class NotAwaitingInput(SlidetutorError):
    """User event arrived while the session is not waiting for one."""


class BadIndex(SlidetutorError):
    """Submitted option index is out of range."""


class UnknownSession(SlidetutorError):
    """No persisted session with that id."""


class UnknownLecture(SlidetutorError):
    """No persisted lecture with that id."""


class PlanInProgress(SlidetutorError):
    """Another planning run already holds this lecture's lease."""


class SchemaViolation(SlidetutorError):
    """Persisted document failed its JSON schema check."""
