"""arXiv search, Atom feed parsing and deduplication."""

from __future__ import annotations

import logging
import re
import urllib.parse
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable

import httpx

from .cache import StageCache, cache_key
from .errors import FeedMalformed, FetchFailed
from .transport import RetryExhausted, Throttle, send_with_retry

logger = logging.getLogger(__name__)

API_URL = "https://export.arxiv.org/api/query"
NS = {"atom": "http://www.w3.org/2005/Atom", "arxiv": "http://arxiv.org/schemas/atom"}

MODERN_ID = re.compile(r"\d{4}\.\d{4,5}")
LEGACY_ID = re.compile(r"[a-z][a-z\-]*(?:\.[A-Z]{2})?/\d{7}")
_ID_IN_URL = re.compile(r"(?:abs|pdf)/(.+?)(?:v(\d+))?(?:\.pdf)?$")


def is_valid_arxiv_id(ident: str) -> bool:
    return bool(MODERN_ID.fullmatch(ident) or LEGACY_ID.fullmatch(ident))


def split_identifier(raw: str) -> tuple[str, int]:
    """``http://arxiv.org/abs/2401.01234v3`` -> ``("2401.01234", 3)``.

    A missing version suffix is reported as version 1.
    """
    raw = raw.strip()
    m = _ID_IN_URL.search(raw)
    if m:
        ident, ver = m.group(1), m.group(2)
    else:
        m = re.fullmatch(r"(?:arXiv:)?(.+?)(?:v(\d+))?", raw)
        ident, ver = m.group(1), m.group(2)
    return ident, int(ver) if ver else 1


@dataclass
class PaperRecord:
    arxiv_id: str
    version: int
    title: str
    abstract: str
    authors: list[str]
    published: datetime | None
    pdf_url: str
    source_keywords: set[str] = field(default_factory=set)
    primary_category: str = ""

    def __post_init__(self) -> None:
        if not self.title.strip():
            raise ValueError("paper title must be non-empty")
        if self.version < 1:
            raise ValueError(f"version must be >= 1, got {self.version}")

    @property
    def has_valid_id(self) -> bool:
        return is_valid_arxiv_id(self.arxiv_id)

    def to_json(self) -> dict:
        return {
            "arxiv_id": self.arxiv_id,
            "version": self.version,
            "title": self.title,
            "abstract": self.abstract,
            "authors": list(self.authors),
            "published": self.published.isoformat().replace("+00:00", "Z") if self.published else None,
            "pdf_url": self.pdf_url,
            "source_keywords": sorted(self.source_keywords),
            "primary_category": self.primary_category,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PaperRecord":
        return cls(
            arxiv_id=d["arxiv_id"], version=int(d["version"]), title=d["title"],
            abstract=d.get("abstract", ""), authors=list(d.get("authors", [])),
            published=_parse_time(d.get("published")), pdf_url=d.get("pdf_url", ""),
            source_keywords=set(d.get("source_keywords", [])),
            primary_category=d.get("primary_category", ""),
        )


def _parse_time(s: str | None) -> datetime | None:
    if not s:
        return None
    try:
        dt = datetime.fromisoformat(s.strip().replace("Z", "+00:00"))
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def build_query(keyword: str, max_results: int, base_url: str = API_URL) -> str:
    if not keyword.strip():
        raise ValueError("keyword must be non-empty")
    if max_results < 1:
        raise ValueError("max_results must be >= 1")
    term = urllib.parse.quote_plus(f'"{keyword.strip()}"')
    return f"{base_url}?search_query=all:{term}&start=0&max_results={max_results}"


def _text(el: ET.Element, path: str) -> str:
    return el.findtext(path, default="", namespaces=NS) or ""


def parse_atom_feed(xml: bytes, keyword: str | None = None) -> list[PaperRecord]:
    try:
        root = ET.fromstring(xml)
    except ET.ParseError as exc:
        raise FeedMalformed(f"could not parse Atom feed: {exc}") from exc
    records: list[PaperRecord] = []
    skipped = 0
    for entry in root.findall("atom:entry", NS):
        title = " ".join(_text(entry, "atom:title").split())
        raw_id = _text(entry, "atom:id")
        if not title or not raw_id.strip():
            skipped += 1
            continue
        ident, version = split_identifier(raw_id)
        pdf_url = ""
        for link in entry.findall("atom:link", NS):
            if link.get("type") == "application/pdf":
                pdf_url = link.get("href", "")
                break
        cat = entry.find("arxiv:primary_category", NS)
        records.append(PaperRecord(
            arxiv_id=ident,
            version=version,
            title=title,
            abstract=" ".join(_text(entry, "atom:summary").split()),
            authors=[" ".join(_text(a, "atom:name").split())
                     for a in entry.findall("atom:author", NS) if _text(a, "atom:name").strip()],
            published=_parse_time(_text(entry, "atom:published")),
            pdf_url=pdf_url,
            source_keywords={keyword} if keyword else set(),
            primary_category=cat.get("term", "") if cat is not None else "",
        ))
    if skipped:
        logger.warning("skipped %d feed entries without title or id", skipped)
    return records


def _title_key(title: str) -> str:
    return " ".join(title.casefold().split())


def dedup(records: Iterable[PaperRecord]) -> list[PaperRecord]:
    """Merge duplicates by version-stripped arXiv id (highest version wins),
    falling back to normalized title for records without a usable id.
    Source keywords are unioned; first-occurrence order is kept."""
    slots: list[PaperRecord] = []
    index: dict[tuple[str, str], int] = {}
    for rec in records:
        key = ("id", rec.arxiv_id) if rec.has_valid_id else ("title", _title_key(rec.title))
        i = index.get(key)
        if i is None:
            index[key] = len(slots)
            slots.append(replace(rec, source_keywords=set(rec.source_keywords)))
            continue
        kept = slots[i]
        merged_kw = kept.source_keywords | rec.source_keywords
        if rec.version > kept.version:
            kept = replace(rec)
        slots[i] = replace(kept, source_keywords=merged_kw)
    return slots


class ArxivClient:
    """Sequential, rate-limited, cached arXiv fetcher."""

    def __init__(self, http: httpx.Client, cache: StageCache, throttle: Throttle,
                 base_url: str = API_URL, retries: int = 3, sleep=None):
        self.http = http
        self.cache = cache
        self.throttle = throttle
        self.base_url = base_url
        self.retries = retries
        self.sleep = sleep or throttle._sleep

    def fetch_raw(self, url: str) -> bytes:
        key = cache_key("fetch", url)
        hit = self.cache.get("fetch", key)
        if hit is not None:
            return hit
        self.throttle.wait()
        try:
            resp = send_with_retry(self.http, "GET", url, retries=self.retries, sleep=self.sleep)
        except RetryExhausted as exc:
            raise FetchFailed(str(exc)) from exc
        except httpx.HTTPError as exc:
            raise FetchFailed(f"{url}: {exc}") from exc
        if resp.status_code != 200:
            raise FetchFailed(f"{url}: HTTP {resp.status_code}")
        self.cache.put("fetch", key, resp.content)
        return resp.content

    def search(self, keyword: str, max_results: int) -> list[PaperRecord]:
        url = build_query(keyword, max_results, self.base_url)
        records = parse_atom_feed(self.fetch_raw(url), keyword=keyword)
        bad = [r.arxiv_id for r in records if not r.has_valid_id]
        if bad:
            logger.warning("feed for %r has %d entries with unrecognized ids: %s",
                           keyword, len(bad), bad[:3])
        return records[:max_results]

    def fetch_all(self, keywords: Iterable[str], max_per_keyword: int) -> list[PaperRecord]:
        out: list[PaperRecord] = []
        for kw in keywords:
            got = self.search(kw, max_per_keyword)
            logger.info("keyword %r: %d papers", kw, len(got))
            out.extend(got)
        return out
