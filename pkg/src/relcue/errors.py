"""Exception types shared across the package."""


class RelcueError(Exception):
    """Base class for all package-specific errors."""


class MissingBinding(RelcueError):
    """A prompt template placeholder has no value in the bindings map."""

    def __init__(self, name: str):
        super().__init__(f"missing binding for placeholder {name!r}")
        self.name = name


class ParseFailure(RelcueError):
    """An LLM response could not be parsed into the expected structure."""


class AmbiguousAnswer(RelcueError):
    """A yes/no response contained neither token."""


class UnknownClass(RelcueError):
    """Object class absent from the taxonomy."""


class LlmUnavailable(RelcueError):
    """No endpoint configured and the cache cannot satisfy the request."""


class CacheMiss(RelcueError):
    """Offline completion requested for a prompt not present in the cache."""


class HttpError(RelcueError):
    """Upstream service returned a non-success status after retries."""

    def __init__(self, status: int, detail: str = ""):
        super().__init__(f"HTTP {status}" + (f": {detail}" if detail else ""))
        self.status = status


class AuthError(RelcueError):
    """Upstream service rejected the credential (401/403)."""


class SchemaError(RelcueError):
    """A persisted document does not match the expected schema or version."""


class DimensionMismatch(RelcueError):
    """Vectors of different dimensions were combined."""


class KeyNotFound(RelcueError):
    """Embedding key absent from the archive."""

    def __init__(self, key: str, context: str = ""):
        super().__init__(f"embedding key not found: {key}" + (f" ({context})" if context else ""))
        self.key = key


class DuplicateKey(RelcueError):
    """Two archive entries share one key."""


class CorruptArchive(RelcueError):
    """Archive blob or manifest fails a layout invariant."""


class MissingCueEntry(RelcueError):
    """Cue pack has no entry for the requested (predicate, subject, object) triple."""


class MissingUnionEmbedding(RelcueError):
    """Baseline scoring requested without a union-region embedding."""


class EmptyDescriptionList(RelcueError):
    """Class-description scoring requested with no descriptions."""


class EmptySupport(RelcueError):
    """Softmax requested with every predicate masked."""


class EmptyGroundTruth(RelcueError):
    """Recall requested for an image with no ground-truth triplets."""


class UnknownPredicate(SchemaError):
    """Dataset references a predicate outside the configured list."""


class UnknownObjectClass(SchemaError):
    """Dataset references an object class outside the configured list."""
