"""Annotator identities and role checks."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import NotFoundError, PermissionDeniedError, ValidationError
from .store import RecordStore

KIND_ANNOTATOR = "annotator"


class Role(str, Enum):
    CVS_RATER = "cvs_rater"
    SEGMENTER = "segmenter"
    REVIEWER = "reviewer"
    SCREENER = "screener"
    ADMIN = "admin"


@dataclass(frozen=True)
class Annotator:
    annotator_id: str
    display_name: str
    roles: frozenset[Role]


class AnnotatorDirectory:
    def __init__(self, store: RecordStore):
        self.store = store

    def register(
        self,
        annotator_id: str,
        display_name: str,
        roles: list[str] | list[Role],
        actor: str = "system",
    ) -> Annotator:
        if not annotator_id:
            raise ValidationError("annotator_id must be non-empty")
        try:
            parsed = frozenset(Role(r) for r in roles)
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        existing = self.store.find(KIND_ANNOTATOR, annotator_id)
        doc = {
            "annotator_id": annotator_id,
            "display_name": display_name,
            "roles": sorted(r.value for r in parsed),
        }
        self.store.put(
            KIND_ANNOTATOR,
            annotator_id,
            doc,
            expected_version=None if existing is None else existing.version,
            actor=actor,
        )
        return Annotator(annotator_id, display_name, parsed)

    def get(self, annotator_id: str) -> Annotator:
        d = self.store.get(KIND_ANNOTATOR, annotator_id).doc
        return Annotator(
            d["annotator_id"],
            d["display_name"],
            frozenset(Role(r) for r in d["roles"]),
        )

    def list(self) -> list[Annotator]:
        return [
            Annotator(
                r.doc["annotator_id"],
                r.doc["display_name"],
                frozenset(Role(x) for x in r.doc["roles"]),
            )
            for r in self.store.scan(KIND_ANNOTATOR)
        ]

    def require_role(self, annotator_id: str, role: Role) -> Annotator:
        try:
            annotator = self.get(annotator_id)
        except NotFoundError:
            # an unknown caller is a permission problem, not a missing resource
            raise PermissionDeniedError(
                f"{annotator_id} is not a registered annotator"
            ) from None
        if role not in annotator.roles:
            raise PermissionDeniedError(
                f"{annotator_id} lacks the {role.value} role"
            )
        return annotator
