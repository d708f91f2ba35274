"""Note templates: builtin set, validation, prompt rendering, section parsing.

The output contract every backend must honor: the model emits each section as
a line ``## <title>`` followed by body text, sections in template order.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import model
from .errors import EmptyTranscript, MalformedOutput
from .llm import PromptBundle

MAX_NAME_LEN = 120
MAX_SECTIONS = 40
MAX_INSTRUCTION_LEN = 4000

OUTPUT_CONTRACT = (
    "Write the note as plain text. Emit every requested section exactly once, "
    "in the order given, each introduced by a line of the form '## <title>' "
    "followed by the section body. Do not add sections of your own."
)


@dataclass(frozen=True)
class TemplateSection:
    title: str
    instruction_text: str


@dataclass(frozen=True)
class NoteTemplate:
    id: str
    name: str
    kind: str  # builtin | custom
    owner_id: Optional[str]
    sections: Tuple[TemplateSection, ...]
    preamble: str
    created_at: str

    kind_tag = "template"

    def section_titles(self) -> Tuple[str, ...]:
        return tuple(s.title for s in self.sections)


_BUILTIN_CREATED_AT = "2024-11-01T00:00:00.000Z"

_BUILTIN_PREAMBLE = (
    "You are a clinical documentation assistant. Draft a clear, faithful note "
    "from the encounter transcript. Record only what was said; never invent "
    "findings. The clinician will review and edit the draft before use."
)

_BUILTIN_SPECS = [
    (
        "builtin-full-visit",
        "Full Visit",
        [
            ("History of Present Illness", "Summarize the presenting complaint, onset, course, and relevant history mentioned in the transcript."),
            ("Examination", "Record physical examination findings stated by the clinician; write 'Not documented' if none were dictated."),
            ("Assessment", "State the clinician's working diagnosis or differential as discussed."),
            ("Plan", "List investigations, treatments, referrals, and follow-up instructions in the order discussed."),
        ],
    ),
    (
        "builtin-narrative",
        "Narrative",
        [
            ("Narrative", "Write a single chronological narrative of the encounter in full sentences, covering complaint, findings, decisions, and disposition."),
        ],
    ),
    (
        "builtin-handover",
        "Handover",
        [
            ("Situation", "One or two sentences: who the patient is and why they are here."),
            ("Background", "Relevant history and events so far this visit."),
            ("Assessment", "Current clinical picture and working diagnosis."),
            ("Recommendation", "Outstanding tasks, pending results, and the disposition plan for the accepting clinician."),
        ],
    ),
]


def builtin_templates() -> List[NoteTemplate]:
    """The three builtin templates, stable in id and content across runs."""
    return [
        NoteTemplate(
            id=tid,
            name=name,
            kind="builtin",
            owner_id=None,
            sections=tuple(TemplateSection(t, i) for t, i in sections),
            preamble=_BUILTIN_PREAMBLE,
            created_at=_BUILTIN_CREATED_AT,
        )
        for tid, name, sections in _BUILTIN_SPECS
    ]


def validate_template(candidate: NoteTemplate) -> List[str]:
    """Every invariant violation as a stable code; empty list means ok."""
    violations = []
    if candidate.kind not in ("builtin", "custom"):
        violations.append("unknown_kind")
    if not candidate.sections:
        violations.append("empty_sections")
    if len(candidate.sections) > MAX_SECTIONS:
        violations.append("too_many_sections")
    titles = [s.title for s in candidate.sections]
    if any(not t.strip() for t in titles):
        violations.append("empty_section_title")
    if len(set(titles)) != len(titles):
        violations.append("duplicate_section_title")
    if candidate.kind == "custom" and not candidate.owner_id:
        violations.append("custom_without_owner")
    if candidate.kind == "builtin" and candidate.owner_id:
        violations.append("builtin_with_owner")
    if not candidate.name or len(candidate.name) > MAX_NAME_LEN:
        violations.append("bad_name")
    if any(len(s.instruction_text) > MAX_INSTRUCTION_LEN for s in candidate.sections):
        violations.append("instruction_too_long")
    return violations


def render_prompt(
    template: NoteTemplate,
    transcripts: List[model.Transcript],
    encounter_context: Optional[str] = None,
) -> PromptBundle:
    """Build the generation prompt.

    user_text carries, in order: each section title with its instructions,
    then each transcript's full text verbatim exactly once, then the optional
    encounter context.
    """
    if not transcripts or all(not t.full_text.strip() for t in transcripts):
        raise EmptyTranscript("no transcript text to generate from")
    parts = []
    for section in template.sections:
        parts.append(f"## {section.title}\n{section.instruction_text}")
    for i, transcript in enumerate(transcripts, start=1):
        parts.append(f"Transcript {i}:\n{transcript.full_text}")
    if encounter_context:
        parts.append(f"Additional context:\n{encounter_context}")
    return PromptBundle(
        system_text=template.preamble + "\n\n" + OUTPUT_CONTRACT,
        user_text="\n\n".join(parts),
        template_id=template.id,
        transcript_ids=tuple(t.id for t in transcripts),
    )


def parse_sections(raw_text: str, template: NoteTemplate) -> List[Tuple[str, str]]:
    """Split model output on '## <title>' markers, in template order.

    Raises MalformedOutput when a title is missing, duplicated, or out of
    order. Bodies are trimmed of surrounding whitespace.
    """
    titles = template.section_titles()
    positions: Dict[str, List[int]] = {t: [] for t in titles}
    marker_spans: List[Tuple[int, int, str]] = []
    for match in re.finditer(r"^## (.+?)\s*$", raw_text, re.MULTILINE):
        title = match.group(1)
        if title in positions:
            positions[title].append(match.start())
            marker_spans.append((match.start(), match.end(), title))
    for title in titles:
        if len(positions[title]) == 0:
            raise MalformedOutput(f"missing section {title!r}")
        if len(positions[title]) > 1:
            raise MalformedOutput(f"section {title!r} appears more than once")
    order = [t for _, _, t in sorted(marker_spans)]
    if order != list(titles):
        raise MalformedOutput(f"sections out of order: {order}")
    sections = []
    spans = sorted(marker_spans)
    for i, (_, header_end, title) in enumerate(spans):
        body_end = spans[i + 1][0] if i + 1 < len(spans) else len(raw_text)
        sections.append((title, raw_text[header_end:body_end].strip()))
    return sections


def template_to_dict(template: NoteTemplate) -> dict:
    return {
        "id": template.id,
        "name": template.name,
        "kind": template.kind,
        "owner_id": template.owner_id,
        "sections": [
            {"title": s.title, "instruction_text": s.instruction_text}
            for s in template.sections
        ],
        "preamble": template.preamble,
        "created_at": template.created_at,
    }


def template_from_dict(data: dict) -> NoteTemplate:
    return NoteTemplate(
        id=data["id"],
        name=data["name"],
        kind=data["kind"],
        owner_id=data.get("owner_id"),
        sections=tuple(
            TemplateSection(s["title"], s["instruction_text"]) for s in data["sections"]
        ),
        preamble=data.get("preamble", ""),
        created_at=data["created_at"],
    )


def template_to_json(template: NoteTemplate) -> str:
    return json.dumps(template_to_dict(template), sort_keys=True, separators=(",", ":"))
