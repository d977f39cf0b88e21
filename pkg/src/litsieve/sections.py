"""PDF text extraction and regex-based section splitting."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Protocol

from .errors import ExtractionFailed

logger = logging.getLogger(__name__)

SECTION_NAMES = ("abstract", "introduction", "methods", "results", "conclusion")

SECTION_PATTERNS = {
    "abstract": re.compile(r"\babstract\b", re.IGNORECASE),
    "introduction": re.compile(r"\bintroduction\b", re.IGNORECASE),
    "methods": re.compile(r"\b(methodology|methods|approach)\b", re.IGNORECASE),
    "results": re.compile(r"\b(results|findings|experiments)\b", re.IGNORECASE),
    "conclusion": re.compile(r"\b(conclusion|discussion|summary)\b", re.IGNORECASE),
}


@dataclass
class SectionedPaper:
    full_text: str
    abstract: str | None = None
    introduction: str | None = None
    methods: str | None = None
    results: str | None = None
    conclusion: str | None = None
    # section name -> (start, end) offsets of the body within full_text
    spans: dict[str, tuple[int, int]] = field(default_factory=dict)

    def present(self) -> dict[str, str]:
        return {n: getattr(self, n) for n in SECTION_NAMES if getattr(self, n) is not None}

    def to_json(self) -> dict:
        return {n: getattr(self, n) for n in SECTION_NAMES}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False, indent=1)


def split_sections(text: str) -> SectionedPaper:
    """Locate each section header with its pattern, in document order.

    Each pattern is searched from the start of the previously found header,
    so a stray word earlier in the text cannot reorder sections. A body runs
    from the end of its header match to the next found header (or the end
    of the text) and is whitespace-trimmed. Text before the first header is
    discarded.
    """
    found: list[tuple[str, int, int]] = []  # name, header start, header end
    pos = 0
    for name in SECTION_NAMES:
        m = SECTION_PATTERNS[name].search(text, pos)
        if m is None:
            continue
        found.append((name, m.start(), m.end()))
        pos = m.start()

    paper = SectionedPaper(full_text=text)
    for i, (name, _start, hdr_end) in enumerate(found):
        stop = found[i + 1][1] if i + 1 < len(found) else len(text)
        body = text[hdr_end:stop]
        lead = len(body) - len(body.lstrip())
        stripped = body.strip()
        b0 = hdr_end + lead
        setattr(paper, name, stripped)
        paper.spans[name] = (b0, b0 + len(stripped))
    return paper


def abstract_only(abstract: str) -> SectionedPaper:
    """Fallback when no full text is available."""
    return SectionedPaper(full_text=abstract, abstract=abstract,
                          spans={"abstract": (0, len(abstract))})


class TextExtractor(Protocol):
    def __call__(self, pdf: bytes) -> str: ...


def pymupdf_extract(pdf: bytes) -> str:
    import pymupdf

    try:
        doc = pymupdf.open(stream=pdf, filetype="pdf")
    except Exception as exc:
        raise ExtractionFailed(f"cannot open PDF: {exc}") from exc
    with doc:
        if doc.needs_pass:
            raise ExtractionFailed("PDF is encrypted")
        try:
            return "\n".join(page.get_text("text", sort=True) for page in doc)
        except Exception as exc:
            raise ExtractionFailed(f"text extraction failed: {exc}") from exc


def extract_text(pdf: bytes, backend: TextExtractor = pymupdf_extract) -> str:
    if not pdf:
        raise ExtractionFailed("empty PDF input")
    return backend(pdf)
