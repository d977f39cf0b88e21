"""Literature review synthesis with citation validation."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Mapping

from .analysis import CitationIntent, ContributionType, StructuredSummary
from .bibtex import BibEntry
from .errors import EmptyCorpus
from .llm import LlmClient, LlmRequest, load_prompt

logger = logging.getLogger(__name__)

_CITE_GROUP = re.compile(r"\[([^\[\]]*@[^\[\]]*)\]")
_CITE_KEY = re.compile(r"-?@([A-Za-z0-9_:.\-]+)")


@dataclass
class ReviewDocument:
    body: str
    cited_keys: set[str]
    warnings: list[str] = field(default_factory=list)


def find_citations(body: str) -> list[str]:
    """Keys cited as ``[@key]`` or ``[@a; @b]``, in order of appearance."""
    keys = []
    for group in _CITE_GROUP.finditer(body):
        keys.extend(m.group(1).rstrip(".:") for m in _CITE_KEY.finditer(group.group(1)))
    return keys


def strip_unknown(body: str, valid: set[str]) -> str:
    def fix(m: re.Match) -> str:
        parts = [p.strip() for p in m.group(1).split(";")]
        kept = [p for p in parts
                if all(k.group(1).rstrip(".:") in valid for k in _CITE_KEY.finditer(p))]
        return f"[{'; '.join(kept)}]" if kept else ""

    out = _CITE_GROUP.sub(fix, body)
    out = re.sub(r"[ \t]{2,}", " ", out)
    out = re.sub(r"[ \t]+([.,;:])", r"\1", out)
    return re.sub(r"[ \t]+$", "", out, flags=re.MULTILINE)


def _paper_block(key: str, summary: StructuredSummary, intent: CitationIntent,
                 contribution: ContributionType, title: str) -> str:
    lines = [f"### [@{key}] {title}", f"- citation intent: {intent.value}",
             f"- contribution type: {contribution.value}"]
    for cat, bullets in summary.model_dump().items():
        lines.append(f"- {cat}:")
        lines.extend(f"  - {b}" for b in bullets)
    return "\n".join(lines)


def synthesize_review(summaries: Mapping[str, StructuredSummary],
                      intents: Mapping[str, CitationIntent],
                      contributions: Mapping[str, ContributionType],
                      bibliography: Mapping[str, BibEntry],
                      llm: LlmClient, *, model_id: str, topic: str = "",
                      titles: Mapping[str, str] | None = None) -> ReviewDocument:
    """``bibliography`` maps paper id -> entry; every summarized paper must have one.

    Unknown citation keys trigger one repair re-prompt; any that survive it
    are removed from the text and reported in ``warnings``.
    """
    ids = [pid for pid in summaries if pid in bibliography]
    if not ids:
        raise EmptyCorpus("no summarized papers to review")
    titles = titles or {}
    blocks = [
        _paper_block(bibliography[pid].key, summaries[pid],
                     intents.get(pid, CitationIntent.Other),
                     contributions.get(pid, ContributionType.Other), titles.get(pid, ""))
        for pid in sorted(ids, key=lambda p: (contributions.get(p, ContributionType.Other).value,
                                              bibliography[p].key))
    ]
    valid = {bibliography[pid].key for pid in ids}
    prompt = load_prompt("review").format(title=topic, papers="\n\n".join(blocks),
                                          example_key=min(valid))
    body = llm.complete(LlmRequest(model_id, prompt, "markdown", task="review")).raw_text
    warnings: list[str] = []
    unknown = sorted(set(find_citations(body)) - valid)
    if unknown:
        logger.warning("review cites unknown keys %s; re-prompting once", unknown)
        repair = prompt + load_prompt("review_repair").format(
            unknown=", ".join(unknown), valid=", ".join(sorted(valid)), previous=body)
        body = llm.complete(LlmRequest(model_id, repair, "markdown", task="review",
                                       subject="repair")).raw_text
        unknown = sorted(set(find_citations(body)) - valid)
        if unknown:
            msg = f"stripped unknown citation keys: {', '.join(unknown)}"
            logger.warning(msg)
            warnings.append(msg)
            body = strip_unknown(body, valid)
    return ReviewDocument(body=body, cited_keys=set(find_citations(body)), warnings=warnings)

