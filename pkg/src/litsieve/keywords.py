"""Search keyword generation from a title and abstract."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .config import InputQuery, PipelineConfig
from .errors import InsufficientKeywords
from .llm import LlmClient, LlmRequest, load_prompt

logger = logging.getLogger(__name__)

PROMPT_VERSION = "keywords-v1"

_PREFIX = re.compile(r"^\s*(?:[-*•‣◦+]|\(?\d+[.)\]:]|\(?[a-zA-Z][.)](?=\s))\s*")
_QUOTES = "\"'`“”‘’«»"


def _clean(item: str) -> str:
    item = item.strip().strip("*_").strip()
    while len(item) >= 2 and item[0] in _QUOTES and item[-1] in _QUOTES:
        item = item[1:-1].strip()
    return item.strip(_QUOTES).strip()


def parse_keyword_response(raw: str) -> list[str]:
    """Parse an LLM keyword list.

    Handles numbered (``1.`` / ``1)``) and bulleted lines as well as
    comma-separated lines. Lines ending in a colon are treated as preamble.
    Duplicates are dropped case-insensitively, keeping the first spelling.
    """
    out: list[str] = []
    seen: set[str] = set()
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.endswith(":") or line.startswith("```"):
            continue
        line = _PREFIX.sub("", line, count=1)
        for part in line.split(","):
            kw = " ".join(_clean(part).split())
            if not kw:
                continue
            folded = kw.casefold()
            if folded in seen:
                continue
            seen.add(folded)
            out.append(kw)
    return out


@dataclass(frozen=True)
class KeywordSet:
    keywords: tuple[str, ...]

    def __post_init__(self) -> None:
        folded = [k.casefold() for k in self.keywords]
        if len(set(folded)) != len(folded):
            raise ValueError("keywords must be unique case-insensitively")
        if any(not k or k != k.strip() for k in self.keywords):
            raise ValueError("keywords must be non-empty and trimmed")


def generate_keywords(query: InputQuery, llm: LlmClient, config: PipelineConfig) -> KeywordSet:
    kmin, kmax = config.keyword_min, config.keyword_max
    prompt = load_prompt("keywords").format(kmin=kmin, kmax=kmax, title=query.title,
                                            abstract=query.abstract)
    request = LlmRequest(config.llm_model_id, prompt, "text", task="keywords")
    keywords = parse_keyword_response(llm.complete(request).raw_text)
    if len(keywords) < kmin:
        logger.warning("LLM returned %d keywords (< %d); retrying once", len(keywords), kmin)
        retry = LlmRequest(config.llm_model_id,
                           prompt + load_prompt("keywords_retry").format(kmin=kmin, kmax=kmax),
                           "text", task="keywords", subject="retry")
        keywords = parse_keyword_response(llm.complete(retry).raw_text)
        if len(keywords) < kmin:
            raise InsufficientKeywords(f"got {len(keywords)} keywords after retry; need >= {kmin}")
    if len(keywords) > kmax:
        logger.info("clamping %d keywords to %d", len(keywords), kmax)
        keywords = keywords[:kmax]
    return KeywordSet(tuple(keywords))
