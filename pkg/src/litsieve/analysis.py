"""Structured summaries and citation-intent / contribution tagging."""

from __future__ import annotations

import json
import logging
import re
from enum import Enum
from typing import Annotated

from pydantic import BaseModel, ConfigDict, StringConstraints, ValidationError, conlist

from .arxiv import PaperRecord
from .errors import NoJsonFound, SchemaViolation
from .llm import LlmClient, LlmRequest, load_prompt
from .sections import SectionedPaper

logger = logging.getLogger(__name__)

SECTION_CHAR_LIMIT = 6000

Bullet = Annotated[str, StringConstraints(strict=True, min_length=1, pattern=r"\S")]
Bullets = conlist(Bullet, min_length=1)


class StructuredSummary(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)

    problem_statement: Bullets
    methodology: Bullets
    key_findings: Bullets
    conclusion_recommendations: Bullets


class SummaryEnvelope(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)

    summary: StructuredSummary


class CitationIntent(str, Enum):
    Background = "Background"
    Comparison = "Comparison"
    Extension = "Extension"
    Criticism = "Criticism"
    Application = "Application"
    FutureWork = "FutureWork"
    Other = "Other"


class ContributionType(str, Enum):
    Dataset = "Dataset"
    Algorithm = "Algorithm"
    Framework = "Framework"
    Review = "Review"
    Benchmark = "Benchmark"
    Survey = "Survey"
    System = "System"
    TheoreticalAnalysis = "TheoreticalAnalysis"
    Other = "Other"


_FENCE = re.compile(r"```[A-Za-z0-9_-]*\s*\n?(.*?)```", re.DOTALL)


def repair_json(raw: str) -> str:
    """Return the outermost balanced ``{...}`` in ``raw``, ignoring Markdown
    fences and any surrounding prose. Braces inside JSON strings are skipped."""
    fenced = _FENCE.search(raw)
    text = fenced.group(1) if fenced and "{" in fenced.group(1) else raw
    start = text.find("{")
    if start < 0:
        raise NoJsonFound("no JSON object in LLM output")
    depth = 0
    in_str = esc = False
    for i in range(start, len(text)):
        c = text[i]
        if in_str:
            if esc:
                esc = False
            elif c == "\\":
                esc = True
            elif c == '"':
                in_str = False
        elif c == '"':
            in_str = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[start:i + 1]
    raise NoJsonFound("unbalanced braces in LLM output")


def parse_summary(raw: str) -> StructuredSummary:
    """Strictly parse ``{"summary": {...}}``; raises ``SchemaViolation``."""
    try:
        data = json.loads(repair_json(raw))
    except NoJsonFound as exc:
        raise SchemaViolation(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"invalid JSON: {exc}") from exc
    try:
        return SummaryEnvelope.model_validate(data).summary
    except ValidationError as exc:
        errs = "; ".join(f"{'.'.join(map(str, e['loc'])) or '<root>'}: {e['msg']}"
                         for e in exc.errors())
        raise SchemaViolation(errs) from exc


def dump_summary(summary: StructuredSummary) -> dict:
    return {"summary": summary.model_dump()}


def _sections_block(sections: SectionedPaper) -> str:
    parts = []
    for name, body in sections.present().items():
        if body:
            parts.append(f"## {name.capitalize()}\n{body[:SECTION_CHAR_LIMIT]}")
    return "\n\n".join(parts)


def summarize(sections: SectionedPaper, llm: LlmClient, *, model_id: str,
              title: str = "", subject: str | None = None) -> StructuredSummary:
    block = _sections_block(sections)
    if not block:
        if not sections.full_text.strip():
            raise ValueError("nothing to summarize: no sections and empty text")
        block = f"## Text\n{sections.full_text[:SECTION_CHAR_LIMIT]}"
    prompt = load_prompt("summarize").format(title=title, sections=block)
    raw = llm.complete(LlmRequest(model_id, prompt, "json", task="summarize",
                                  subject=subject)).raw_text
    try:
        return parse_summary(raw)
    except SchemaViolation as exc:
        logger.warning("summary for %s rejected (%s); re-prompting once", subject, exc)
        repair = prompt + load_prompt("summarize_repair").format(error=exc, previous=raw[:4000])
        raw2 = llm.complete(LlmRequest(model_id, repair, "json", task="summarize",
                                       subject=f"{subject}:repair" if subject else "repair")).raw_text
        return parse_summary(raw2)


def normalize_label(label: str) -> str:
    """Trim, case-fold and collapse internal whitespace."""
    return " ".join(label.casefold().split())


def _match(raw: str, enum_cls):
    table = {m.value.casefold(): m for m in enum_cls}
    candidates = [raw]
    first_line = raw.strip().splitlines()[0] if raw.strip() else ""
    candidates.append(first_line)
    for cand in candidates:
        norm = normalize_label(cand)
        norm = re.sub(r"^(label|intent|contribution|answer)\s*:\s*", "", norm)
        key = re.sub(r"[^a-z]", "", norm)
        if key in table:
            return table[key]
    return enum_cls.Other


def to_intent(label: str) -> CitationIntent:
    return _match(label, CitationIntent)


def to_contribution(label: str) -> ContributionType:
    return _match(label, ContributionType)


def _tag_prompt(name: str, summary: StructuredSummary, record: PaperRecord) -> str:
    return load_prompt(name).format(title=record.title, abstract=record.abstract,
                                    summary=json.dumps(dump_summary(summary), indent=1))


def tag_intent(summary: StructuredSummary, record: PaperRecord, llm: LlmClient, *,
               model_id: str) -> CitationIntent:
    raw = llm.complete(LlmRequest(model_id, _tag_prompt("intent", summary, record), "text",
                                  task="intent", subject=record.arxiv_id)).raw_text
    return to_intent(raw)


def tag_contribution(summary: StructuredSummary, record: PaperRecord, llm: LlmClient, *,
                     model_id: str) -> ContributionType:
    raw = llm.complete(LlmRequest(model_id, _tag_prompt("contribution", summary, record), "text",
                                  task="contribution", subject=record.arxiv_id)).raw_text
    return to_contribution(raw)
