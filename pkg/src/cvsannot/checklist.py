"""The three-criterion safety checklist shown to raters.

The wording is versioned so exported datasets can state exactly which form
the raters saw. Each criterion is judged independently as a binary; the
overall verdict is derived, never asked."""

from __future__ import annotations

from dataclasses import dataclass

CHECKLIST_VERSION = "1"

CRITERION_KEYS = ("c1", "c2", "c3")


@dataclass(frozen=True)
class CriterionChecklist:
    key: str
    title: str
    definition: str
    achieved: str
    not_achieved: str


DEFAULT_CHECKLIST: tuple[CriterionChecklist, ...] = (
    CriterionChecklist(
        key="c1",
        title="Two structures",
        definition=(
            "Exactly two tubular structures remain connected to the gallbladder: "
            "the cystic duct and the cystic artery."
        ),
        achieved=(
            "Both structures can be followed to the gallbladder and nothing else "
            "tubular still enters it."
        ),
        not_achieved=(
            "Fewer than two structures are identifiable, an extra structure still "
            "enters the gallbladder, or the connections cannot be traced."
        ),
    ),
    CriterionChecklist(
        key="c2",
        title="Hepatocystic triangle cleared",
        definition=(
            "The hepatocystic triangle is cleared of fat and fibrous tissue so "
            "that its contents are unambiguous. Clearance shows as two "
            "full-thickness windows: one between the cystic duct and the cystic "
            "artery, and one between the cystic artery and the liver. When only "
            "one structure is present (a single duct), a single window behind it "
            "suffices."
        ),
        achieved=(
            "Both windows (or the single window for a lone duct) are open through "
            "the full thickness of the tissue, with the liver visible behind."
        ),
        not_achieved=(
            "Residual tissue blocks either window or the view through the "
            "triangle is obscured."
        ),
    ),
    CriterionChecklist(
        key="c3",
        title="Cystic plate exposed",
        definition=(
            "The lower third of the gallbladder is separated from the liver bed "
            "so that the cystic plate is exposed."
        ),
        achieved=(
            "The cystic plate is visible along the whole inferior margin of the "
            "dissected portion."
        ),
        not_achieved=(
            "The gallbladder remains attached over the lower third or the plate "
            "is only partially visible."
        ),
    ),
)


def checklist_as_doc(version: str = CHECKLIST_VERSION) -> dict:
    return {
        "version": version,
        "criteria": [
            {
                "key": c.key,
                "title": c.title,
                "definition": c.definition,
                "achieved": c.achieved,
                "not_achieved": c.not_achieved,
            }
            for c in DEFAULT_CHECKLIST
        ],
    }
