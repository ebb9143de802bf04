"""Domain error hierarchy. The HTTP layer maps each class to one status code."""

from __future__ import annotations


class AnnotationError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(AnnotationError):
    """Input or invariant violation (HTTP 422)."""


class NotFoundError(AnnotationError):
    """Referenced record does not exist (HTTP 404)."""


class VersionConflictError(AnnotationError):
    """Optimistic write lost: stored version differs from the expected one (HTTP 409)."""


class ConflictError(AnnotationError):
    """Resource already exists in a conflicting form, e.g. duplicate video
    registration or a second author on an already-segmented frame (HTTP 409)."""


class WorkflowStateError(AnnotationError):
    """Operation not allowed in the record's current lifecycle state (HTTP 409)."""


class PermissionDeniedError(AnnotationError):
    """Missing role, unassigned rater, or independence violation such as
    self-review (HTTP 403)."""


class GateBlockedError(AnnotationError):
    """Export requested while the completeness gate has blocking items (HTTP 409)."""

    def __init__(self, message: str, blockers: list | None = None):
        super().__init__(message)
        self.blockers = blockers or []


class DecodeError(AnnotationError):
    """Frame decoding failed."""


class StorageError(AnnotationError):
    """Underlying store I/O failed."""
