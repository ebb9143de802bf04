"""Multi-rater safety assessments and consensus voting.

Raters answer the three checklist criteria independently per target (a whole
video or a single manual keyframe). Nothing here averages, mediates, or lets
raters see each other's answers; consensus is a per-criterion majority vote
computed on read. Auto-negative frames never accept human assessments, their
labels come from the sampling step."""

from __future__ import annotations

from dataclasses import dataclass

from .annotators import AnnotatorDirectory, Role
from .checklist import CHECKLIST_VERSION
from .errors import (
    NotFoundError,
    PermissionDeniedError,
    ValidationError,
    WorkflowStateError,
)
from .ingestion import KIND_VIDEO
from .sampling import KIND_AUTO_LABEL, FrameOrigin, RoiSampler
from .store import RecordStore

KIND_ASSESSMENT = "assessment"
KIND_ASSIGNMENT = "assignment"

MIN_RATERS = 3

SOURCE_VOTED = "voted"
SOURCE_AUTOMATIC = "automatic"


def assessment_id(target_id: str, rater_id: str) -> str:
    return f"{target_id}::{rater_id}"


@dataclass(frozen=True)
class CvsAssessment:
    target_id: str
    rater_id: str
    c1: bool
    c2: bool
    c3: bool
    comment: str = ""
    checklist_version: str = CHECKLIST_VERSION
    version: int = 0

    @property
    def cvs(self) -> bool:
        """The overall verdict is the conjunction of the three criteria and is
        never stored or asked separately."""
        return self.c1 and self.c2 and self.c3

    @property
    def record_id(self) -> str:
        return assessment_id(self.target_id, self.rater_id)

    def to_doc(self) -> dict:
        return {
            "target_id": self.target_id,
            "rater_id": self.rater_id,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "comment": self.comment,
            "checklist_version": self.checklist_version,
        }

    @classmethod
    def from_record(cls, record) -> "CvsAssessment":
        d = record.doc
        return cls(
            target_id=d["target_id"],
            rater_id=d["rater_id"],
            c1=d["c1"],
            c2=d["c2"],
            c3=d["c3"],
            comment=d.get("comment", ""),
            checklist_version=d.get("checklist_version", CHECKLIST_VERSION),
            version=record.version,
        )


@dataclass(frozen=True)
class ConsensusLabel:
    target_id: str
    c1: bool
    c2: bool
    c3: bool
    n_raters: int
    source: str

    @property
    def cvs(self) -> bool:
        return self.c1 and self.c2 and self.c3

    def to_doc(self) -> dict:
        return {
            "target_id": self.target_id,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "cvs": self.cvs,
            "n_raters": self.n_raters,
            "source": self.source,
        }


def majority(votes: list[bool]) -> bool:
    """Strict majority of true votes; an even split counts as not achieved."""
    return sum(1 for v in votes if v) * 2 > len(votes)


def _require_bool(name: str, value) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(f"{name} must be a boolean, got {value!r}")
    return value


class AssessmentService:
    def __init__(
        self,
        store: RecordStore,
        directory: AnnotatorDirectory,
        sampler: RoiSampler,
    ):
        self.store = store
        self.directory = directory
        self.sampler = sampler

    # -- targets --------------------------------------------------------------

    def check_target(self, target_id: str) -> None:
        """A target is a registered video or a manual keyframe from a plan."""
        if self.store.find(KIND_VIDEO, target_id) is not None:
            return
        ref = self.sampler.find_frame(target_id)
        if ref.origin is FrameOrigin.AUTO_NEGATIVE:
            raise ValidationError(
                f"{target_id} is auto-labeled; it does not take human assessments"
            )

    # -- assignments ----------------------------------------------------------

    def assign_raters(
        self, target_id: str, rater_ids: list[str], actor: str = "system"
    ) -> list[str]:
        self.check_target(target_id)
        unique = sorted(set(rater_ids))
        if len(unique) < MIN_RATERS:
            raise ValidationError(
                f"at least {MIN_RATERS} distinct raters required, got {len(unique)}"
            )
        for rater_id in unique:
            self.directory.require_role(rater_id, Role.CVS_RATER)
        existing = self.store.find(KIND_ASSIGNMENT, target_id)
        self.store.put(
            KIND_ASSIGNMENT,
            target_id,
            {"target_id": target_id, "rater_ids": unique},
            expected_version=None if existing is None else existing.version,
            actor=actor,
        )
        return unique

    def assigned_raters(self, target_id: str) -> list[str]:
        rec = self.store.find(KIND_ASSIGNMENT, target_id)
        return [] if rec is None else list(rec.doc["rater_ids"])

    def pending_raters(self, target_id: str) -> list[str]:
        submitted = {a.rater_id for a in self.list_assessments(target_id)}
        return [r for r in self.assigned_raters(target_id) if r not in submitted]

    # -- submissions ----------------------------------------------------------

    def submit_assessment(
        self,
        target_id: str,
        rater_id: str,
        c1: bool,
        c2: bool,
        c3: bool,
        comment: str = "",
    ) -> CvsAssessment:
        self.check_target(target_id)
        if rater_id not in self.assigned_raters(target_id):
            raise PermissionDeniedError(
                f"{rater_id} is not assigned to rate {target_id}"
            )
        assessment = CvsAssessment(
            target_id=target_id,
            rater_id=rater_id,
            c1=_require_bool("c1", c1),
            c2=_require_bool("c2", c2),
            c3=_require_bool("c3", c3),
            comment=comment,
        )
        existing = self.store.find(KIND_ASSESSMENT, assessment.record_id)
        rec = self.store.put(
            KIND_ASSESSMENT,
            assessment.record_id,
            assessment.to_doc(),
            expected_version=None if existing is None else existing.version,
            actor=rater_id,
        )
        return CvsAssessment.from_record(rec)

    def list_assessments(self, target_id: str) -> list[CvsAssessment]:
        prefix = f"{target_id}::"
        out = [
            CvsAssessment.from_record(r)
            for r in self.store.scan(KIND_ASSESSMENT)
            if r.record_id.startswith(prefix)
        ]
        out.sort(key=lambda a: a.rater_id)
        return out

    # -- consensus ------------------------------------------------------------

    def compute_consensus(self, target_id: str) -> ConsensusLabel:
        """Pure read: derives the label from stored votes, writes nothing."""
        auto = self.store.find(KIND_AUTO_LABEL, target_id)
        if auto is not None:
            d = auto.doc
            return ConsensusLabel(
                target_id=target_id,
                c1=d["c1"],
                c2=d["c2"],
                c3=d["c3"],
                n_raters=0,
                source=SOURCE_AUTOMATIC,
            )
        self.check_target(target_id)
        assessments = self.list_assessments(target_id)
        if len(assessments) < MIN_RATERS:
            raise WorkflowStateError(
                f"consensus for {target_id} needs at least {MIN_RATERS} "
                f"assessments, have {len(assessments)}"
            )
        return ConsensusLabel(
            target_id=target_id,
            c1=majority([a.c1 for a in assessments]),
            c2=majority([a.c2 for a in assessments]),
            c3=majority([a.c3 for a in assessments]),
            n_raters=len(assessments),
            source=SOURCE_VOTED,
        )

    def try_consensus(self, target_id: str) -> ConsensusLabel | None:
        try:
            return self.compute_consensus(target_id)
        except (WorkflowStateError, NotFoundError, ValidationError):
            return None
