"""Inter-rater agreement and the two QA review mechanisms.

Agreement uses Cohen's kappa on the binary criterion labels of the targets a
rater pair both assessed. Quality review comes in two flavors: randomized
batches whose items carry no authorship information, and per-video sequential
queues that walk the manual keyframes in timestamp order."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .errors import NotFoundError, ValidationError
from .ingestion import KIND_VIDEO
from .sampling import RoiSampler
from .segmentation import KIND_SEGMENTATION
from .store import RecordStore

KIND_BATCH = "batch"

CRITERIA = ("c1", "c2", "c3", "cvs")


def cohen_kappa(a: list[bool], b: list[bool]) -> float | None:
    """Observed vs chance agreement for two binary label lists.

    Returns None when chance agreement is exactly 1 and the lists differ,
    which is the undefined case; identical constant lists score 1.0."""
    if len(a) != len(b):
        raise ValidationError(
            f"label lists differ in length ({len(a)} vs {len(b)})"
        )
    if not a:
        raise ValidationError("label lists must be non-empty")
    n = len(a)
    both_true = both_false = 0
    for x, y in zip(a, b):
        if x and y:
            both_true += 1
        elif not x and not y:
            both_false += 1
    p_o = (both_true + both_false) / n
    pa = sum(1 for x in a if x) / n
    pb = sum(1 for y in b if y) / n
    p_e = pa * pb + (1 - pa) * (1 - pb)
    if p_e == 1.0:
        return 1.0 if list(a) == list(b) else None
    return (p_o - p_e) / (1 - p_e)


@dataclass(frozen=True)
class PairAgreement:
    rater_a: str
    rater_b: str
    kappa: float | None
    n_shared: int
    status: str  # "ok" | "undefined" | "missing"


@dataclass
class AgreementReport:
    scope: str
    criterion: str
    raters: list[str]
    pairs: list[PairAgreement]
    mean_kappa: float | None

    def pair(self, a: str, b: str) -> PairAgreement:
        for p in self.pairs:
            if {p.rater_a, p.rater_b} == {a, b}:
                return p
        raise KeyError((a, b))

    def to_doc(self) -> dict:
        return {
            "scope": self.scope,
            "criterion": self.criterion,
            "raters": self.raters,
            "pairs": [
                {
                    "rater_a": p.rater_a,
                    "rater_b": p.rater_b,
                    "kappa": p.kappa,
                    "n_shared": p.n_shared,
                    "status": p.status,
                }
                for p in self.pairs
            ],
            "mean_kappa": self.mean_kappa,
        }


def _target_video(target_id: str) -> str:
    # frame ids are "<video_id>-<9 digits>"; video-level targets have no dash
    head, sep, tail = target_id.rpartition("-")
    if sep and tail.isdigit() and len(tail) == 9:
        return head
    return target_id


class QaService:
    def __init__(self, store: RecordStore, sampler: RoiSampler | None = None):
        self.store = store
        self.sampler = sampler

    # -- agreement ------------------------------------------------------------

    def _scoped_assessments(
        self, project_id: str | None, video_id: str | None
    ) -> list:
        from .assessment import KIND_ASSESSMENT, CvsAssessment

        wanted_videos: set[str] | None = None
        if video_id is not None:
            self.store.get(KIND_VIDEO, video_id)
            wanted_videos = {video_id}
        elif project_id is not None:
            wanted_videos = {
                r.record_id
                for r in self.store.scan(KIND_VIDEO)
                if r.doc["project_id"] == project_id
            }
            if not wanted_videos:
                raise NotFoundError(f"project {project_id} has no videos")
        out = []
        for rec in self.store.scan(KIND_ASSESSMENT):
            a = CvsAssessment.from_record(rec)
            if wanted_videos is None or _target_video(a.target_id) in wanted_videos:
                out.append(a)
        return out

    def agreement_report(
        self,
        criterion: str,
        project_id: str | None = None,
        video_id: str | None = None,
    ) -> AgreementReport:
        if criterion not in CRITERIA:
            raise ValidationError(
                f"criterion must be one of {', '.join(CRITERIA)}"
            )
        assessments = self._scoped_assessments(project_id, video_id)
        by_rater: dict[str, dict[str, bool]] = {}
        for a in assessments:
            value = a.cvs if criterion == "cvs" else getattr(a, criterion)
            by_rater.setdefault(a.rater_id, {})[a.target_id] = value
        raters = sorted(by_rater)
        pairs: list[PairAgreement] = []
        kappas: list[float] = []
        for i, ra in enumerate(raters):
            for rb in raters[i + 1 :]:
                shared = sorted(set(by_rater[ra]) & set(by_rater[rb]))
                if not shared:
                    pairs.append(PairAgreement(ra, rb, None, 0, "missing"))
                    continue
                k = cohen_kappa(
                    [by_rater[ra][t] for t in shared],
                    [by_rater[rb][t] for t in shared],
                )
                if k is None:
                    pairs.append(PairAgreement(ra, rb, None, len(shared), "undefined"))
                else:
                    pairs.append(PairAgreement(ra, rb, k, len(shared), "ok"))
                    kappas.append(k)
        scope = f"video:{video_id}" if video_id else f"project:{project_id or 'all'}"
        mean = sum(kappas) / len(kappas) if kappas else None
        return AgreementReport(scope, criterion, raters, pairs, mean)

    # -- randomized anonymous batches -------------------------------------------

    def make_review_batch(
        self,
        size: int,
        seed: int,
        project_id: str | None = None,
        actor: str = "system",
    ) -> dict:
        """Draw a reproducible random sample of completed annotations and strip
        everything that could identify who produced them. The mapping back to
        the source records stays in the stored batch for adjudication but is
        not part of the items themselves."""
        from .assessment import KIND_ASSESSMENT

        if size <= 0:
            raise ValidationError("batch size must be positive")
        pool: list[tuple[str, str]] = []
        for rec in self.store.scan(KIND_ASSESSMENT):
            pool.append((KIND_ASSESSMENT, rec.record_id))
        for rec in self.store.scan(KIND_SEGMENTATION):
            if rec.doc["status"] != "draft":
                pool.append((KIND_SEGMENTATION, rec.record_id))
        if project_id is not None:
            wanted = {
                r.record_id
                for r in self.store.scan(KIND_VIDEO)
                if r.doc["project_id"] == project_id
            }

            def in_scope(item: tuple[str, str]) -> bool:
                kind, record_id = item
                doc = self.store.get(kind, record_id).doc
                target = doc.get("target_id") or doc.get("frame_id")
                return _target_video(target) in wanted

            pool = [item for item in pool if in_scope(item)]
        if len(pool) < size:
            raise ValidationError(
                f"pool has {len(pool)} completed annotations, cannot draw {size}"
            )
        pool.sort()
        chosen = random.Random(seed).sample(pool, size)
        batch_id = "batch-" + hashlib.sha256(
            f"{seed}|{size}|{len(pool)}".encode()
        ).hexdigest()[:12]
        items = []
        sources = {}
        for kind, record_id in chosen:
            doc = self.store.get(kind, record_id).doc
            item_key = hashlib.sha256(
                f"{batch_id}|{kind}|{record_id}".encode()
            ).hexdigest()[:16]
            if kind == KIND_ASSESSMENT:
                items.append(
                    {
                        "item_key": item_key,
                        "item_type": "assessment",
                        "target_id": doc["target_id"],
                        "c1": doc["c1"],
                        "c2": doc["c2"],
                        "c3": doc["c3"],
                    }
                )
            else:
                items.append(
                    {
                        "item_key": item_key,
                        "item_type": "segmentation",
                        "frame_id": doc["frame_id"],
                        "shapes": doc["polygons"],
                    }
                )
            sources[item_key] = {"kind": kind, "record_id": record_id}
        items.sort(key=lambda d: d["item_key"])
        batch_doc = {
            "batch_id": batch_id,
            "seed": seed,
            "size": size,
            "items": items,
            "sources": sources,
        }
        existing = self.store.find(KIND_BATCH, batch_id)
        self.store.put(
            KIND_BATCH,
            batch_id,
            batch_doc,
            expected_version=None if existing is None else existing.version,
            actor=actor,
        )
        return batch_doc

    def get_batch(self, batch_id: str, include_sources: bool = False) -> dict:
        doc = dict(self.store.get(KIND_BATCH, batch_id).doc)
        if not include_sources:
            doc.pop("sources", None)
        return doc

    # -- sequential queues ---------------------------------------------------

    def sequential_review_queue(self, video_id: str, reviewer_id: str) -> list[dict]:
        """Manual keyframes of one video in timestamp order, each with its
        annotation state. Frames the reviewer authored are flagged rather than
        hidden so the queue order stays stable."""
        from .assessment import KIND_ASSESSMENT

        if self.sampler is None:
            raise ValidationError("queue requires a sampler")
        plan = self.sampler.get_plan(video_id)
        queue = []
        frames = sorted(plan.manual_keyframes, key=lambda r: r.timestamp_ms)
        for pos, ref in enumerate(frames):
            seg = self.store.find(KIND_SEGMENTATION, f"seg-{ref.frame_id}")
            n_assessments = sum(
                1
                for rec in self.store.scan(KIND_ASSESSMENT)
                if rec.record_id.startswith(f"{ref.frame_id}::")
            )
            queue.append(
                {
                    "frame_id": ref.frame_id,
                    "timestamp_ms": ref.timestamp_ms,
                    "position": pos,
                    "total": len(frames),
                    "n_assessments": n_assessments,
                    "segmentation_status": None if seg is None else seg.doc["status"],
                    "self_authored": bool(
                        seg is not None and seg.doc["author_id"] == reviewer_id
                    ),
                }
            )
        return queue
