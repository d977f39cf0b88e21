"""End-to-end orchestration:

keywords -> fetch -> dedup -> embed -> filter -> section -> summarize -> tag
-> bibtex -> synthesize

Every network exchange is cached under ``cache_dir/<stage>/<key>``, so an
interrupted run resumes where it stopped and an identical rerun is served
entirely from disk.
"""

from __future__ import annotations

import contextlib
import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import httpx

from . import arxiv
from .analysis import (CitationIntent, ContributionType, StructuredSummary, dump_summary,
                       summarize, tag_contribution, tag_intent)
from .arxiv import ArxivClient, PaperRecord
from .bibtex import BibEntry, make_bibliography, render_bibliography
from .cache import StageCache, cache_key
from .config import InputQuery, PipelineConfig
from .embeddings import ProviderDescriptor, RemoteEmbedder, embed_query_and_corpus, query_text
from .errors import (ConfigInvalid, EmptyCorpus, ExtractionFailed, OfflineMiss,
                     SchemaViolation, StageFailure)
from .keywords import generate_keywords
from .llm import (CachedLlmClient, CacheOnlyLlmClient, FixtureLlmClient, HttpLlmClient,
                  LlmClient)
from .relevance import DistributionStats, ScoredPaper, compute_stats, filter_by_threshold, score_candidates
from .review import ReviewDocument, synthesize_review
from .sections import SectionedPaper, TextExtractor, abstract_only, extract_text, pymupdf_extract, split_sections
from .transport import RequestCounter, RetryExhausted, Throttle, make_client, send_with_retry, OfflineTransport

logger = logging.getLogger(__name__)

STAGES = ("keywords", "fetch", "dedup", "embed", "filter", "section", "summarize", "tag",
          "bibtex", "synthesize")


@dataclass
class ReviewBundle:
    keywords: list[str]
    corpus: list[PaperRecord]
    retained: list[PaperRecord]
    scores: list[ScoredPaper]
    stats: DistributionStats
    sections: dict[str, SectionedPaper]
    summaries: dict[str, StructuredSummary]
    intents: dict[str, CitationIntent]
    contributions: dict[str, ContributionType]
    bibliography: list[BibEntry]
    review: ReviewDocument
    # papers above threshold that were dropped later, with the reason
    dropped: dict[str, str] = field(default_factory=dict)

    @property
    def review_text(self) -> str:
        return self.review.body

    def check_invariants(self) -> None:
        ids = {p.arxiv_id for p in self.retained}
        for name in ("summaries", "intents", "contributions"):
            keys = set(getattr(self, name))
            if keys != ids:
                raise AssertionError(f"{name} keys {sorted(keys ^ ids)} disagree with retained")
        bib_keys = {e.key for e in self.bibliography}
        if len(self.bibliography) != len(ids) or len(bib_keys) != len(ids):
            raise AssertionError("bibliography must hold exactly one entry per retained paper")
        if not self.review.cited_keys <= bib_keys:
            raise AssertionError(f"unresolved citations {self.review.cited_keys - bib_keys}")


@contextlib.contextmanager
def stage(name: str):
    logger.info("stage %s", name)
    try:
        yield
    except (StageFailure, EmptyCorpus):
        raise
    except Exception as exc:
        raise StageFailure(name, exc) from exc


class Pipeline:
    def __init__(self, config: PipelineConfig, llm: LlmClient, http: httpx.Client,
                 cache: StageCache, *, sleep: Callable[[float], None] = time.sleep,
                 extractor: TextExtractor = pymupdf_extract, rate_limit: bool = True):
        self.config = config
        self.cache = cache
        self.llm = CachedLlmClient(llm, cache)
        self.http = http
        self.sleep = sleep
        self.extractor = extractor
        self.throttle = Throttle(config.request_delay_ms if rate_limit else 0, sleep=sleep)
        self.arxiv = ArxivClient(http, cache, self.throttle, sleep=sleep)
        self.remote = RemoteEmbedder(http, cache, api_key=config.embedding_api_key, sleep=sleep)

    # -- individual stages, usable on their own by the CLI ------------------

    def keywords(self, query: InputQuery) -> list[str]:
        return list(generate_keywords(query, self.llm, self.config).keywords)

    def fetch(self, keywords: list[str]) -> list[PaperRecord]:
        return self.arxiv.fetch_all(keywords, self.config.max_per_keyword)

    @staticmethod
    def dedup(records: list[PaperRecord]) -> list[PaperRecord]:
        unique = arxiv.dedup(records)
        usable = [r for r in unique if r.has_valid_id]
        if len(usable) < len(unique):
            logger.warning("dropping %d records with unrecognized arXiv ids",
                           len(unique) - len(usable))
        return usable

    def descriptor(self) -> ProviderDescriptor:
        try:
            return ProviderDescriptor.resolve(self.config.provider_id, self.config.embedding_api_url)
        except ValueError as exc:
            raise ConfigInvalid("provider_id", self.config.provider_id, str(exc)) from exc

    def score(self, query: InputQuery, corpus: list[PaperRecord]) -> list[ScoredPaper]:
        qvec, vecs = embed_query_and_corpus(self.descriptor(), query,
                                            [query_text(p) for p in corpus], self.remote)
        return score_candidates(qvec, [p.arxiv_id for p in corpus], vecs)

    def filter(self, scored: list[ScoredPaper]) -> tuple[DistributionStats, list[ScoredPaper]]:
        stats = compute_stats([s.score for s in scored], self.config.iqr_multiplier)
        return stats, filter_by_threshold(scored, stats)

    def _pdf_bytes(self, record: PaperRecord) -> bytes:
        key = cache_key("section", record.pdf_url)
        hit = self.cache.get("section", key)
        if hit is not None:
            return hit
        self.throttle.wait()
        try:
            resp = send_with_retry(self.http, "GET", record.pdf_url, sleep=self.sleep)
        except (RetryExhausted, httpx.HTTPError) as exc:
            raise ExtractionFailed(f"PDF download failed: {exc}") from exc
        if resp.status_code in (403, 404, 410):
            self.cache.put("section", key, b"")  # permanent miss
            return b""
        if resp.status_code != 200:
            raise ExtractionFailed(f"PDF download failed: HTTP {resp.status_code}")
        self.cache.put("section", key, resp.content)
        return resp.content

    def section(self, record: PaperRecord) -> SectionedPaper:
        if not (self.config.fetch_pdfs and record.pdf_url):
            return abstract_only(record.abstract)
        try:
            pdf = self._pdf_bytes(record)
            if not pdf:
                logger.info("%s: no PDF available; using abstract only", record.arxiv_id)
                return abstract_only(record.abstract)
            text = extract_text(pdf, self.extractor)
        except (ExtractionFailed, OfflineMiss) as exc:
            logger.warning("%s: %s; using abstract only", record.arxiv_id, exc)
            return abstract_only(record.abstract)
        if not text.strip():
            return abstract_only(record.abstract)
        return split_sections(text)

    # -- full run -----------------------------------------------------------

    def run(self, query: InputQuery) -> ReviewBundle:
        cfg = self.config
        with stage("keywords"):
            keywords = self.keywords(query)
        with stage("fetch"):
            fetched = self.fetch(keywords)
        with stage("dedup"):
            corpus = self.dedup(fetched)
        if not corpus:
            raise EmptyCorpus("no papers survived deduplication")
        with stage("embed"):
            scored = self.score(query, corpus)
        with stage("filter"):
            stats, kept = self.filter(scored)
        by_id = {p.arxiv_id: p for p in corpus}
        retained = [by_id[s.arxiv_id] for s in kept]

        with stage("section"):
            sections = {p.arxiv_id: self.section(p) for p in retained}

        dropped: dict[str, str] = {}
        summaries: dict[str, StructuredSummary] = {}
        with stage("summarize"):
            for p in retained:
                try:
                    summaries[p.arxiv_id] = summarize(sections[p.arxiv_id], self.llm,
                                                      model_id=cfg.llm_model_id, title=p.title,
                                                      subject=p.arxiv_id)
                except SchemaViolation as exc:
                    logger.error("%s: summary failed validation twice: %s", p.arxiv_id, exc)
                    dropped[p.arxiv_id] = f"SchemaViolation: {exc}"
        retained = [p for p in retained if p.arxiv_id in summaries]

        intents: dict[str, CitationIntent] = {}
        contributions: dict[str, ContributionType] = {}
        with stage("tag"):
            for p in retained:
                s = summaries[p.arxiv_id]
                intents[p.arxiv_id] = tag_intent(s, p, self.llm, model_id=cfg.llm_model_id)
                contributions[p.arxiv_id] = tag_contribution(s, p, self.llm,
                                                             model_id=cfg.llm_model_id)
        with stage("bibtex"):
            bibliography = make_bibliography(retained)
        with stage("synthesize"):
            review = synthesize_review(
                summaries, intents, contributions,
                {p.arxiv_id: e for p, e in zip(retained, bibliography)}, self.llm,
                model_id=cfg.llm_model_id, topic=query.title,
                titles={p.arxiv_id: p.title for p in retained})

        bundle = ReviewBundle(keywords, corpus, retained, scored, stats, sections, summaries,
                              intents, contributions, bibliography, review, dropped)
        bundle.check_invariants()
        return bundle


# -- outputs ------------------------------------------------------------------

def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def write_papers(corpus: list[PaperRecord], out: Path) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "papers.json", [p.to_json() for p in corpus])
    return out / "papers.json"


def read_papers(path: Path) -> list[PaperRecord]:
    return [PaperRecord.from_json(d) for d in json.loads(Path(path).read_text(encoding="utf-8"))]


def write_scores(scored: list[ScoredPaper], stats: DistributionStats, out: Path,
                 provider_id: str, multiplier: float) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["arxiv_id", "score", "retained"])
        for s in scored:
            w.writerow([s.arxiv_id, repr(s.score), int(s.score >= stats.threshold)])
    _dump(out / "stats.json", {**stats.to_json(), "provider_id": provider_id,
                               "multiplier": multiplier})


def write_outputs(bundle: ReviewBundle, config: PipelineConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "keywords.json", bundle.keywords)
    write_papers(bundle.corpus, out)
    write_scores(bundle.scores, bundle.stats, out, config.provider_id, config.iqr_multiplier)
    sec_dir = out / "sections"
    sec_dir.mkdir(exist_ok=True)
    for pid, sp in bundle.sections.items():
        (sec_dir / f"{pid.replace('/', '_')}.json").write_text(sp.dumps() + "\n", encoding="utf-8")
    _dump(out / "summaries.json", {
        p.arxiv_id: {**dump_summary(bundle.summaries[p.arxiv_id]),
                     "intent": bundle.intents[p.arxiv_id].value,
                     "contribution": bundle.contributions[p.arxiv_id].value}
        for p in bundle.retained
    })
    (out / "refs.bib").write_text(render_bibliography(bundle.bibliography), encoding="utf-8")
    (out / "review.md").write_text(bundle.review.body.rstrip() + "\n", encoding="utf-8")
    if bundle.dropped or bundle.review.warnings:
        _dump(out / "warnings.json", {"dropped": bundle.dropped,
                                      "review": bundle.review.warnings})
    return out


# -- wiring -------------------------------------------------------------------

def build_pipeline(config: PipelineConfig, *, offline: bool = False,
                   fixtures: Path | None = None, use_cache: bool = True,
                   counter: RequestCounter | None = None,
                   transport: httpx.BaseTransport | None = None,
                   llm: LlmClient | None = None,
                   sleep: Callable[[float], None] = time.sleep) -> Pipeline:
    """Assemble a pipeline from config.

    Offline runs route HTTP through :class:`OfflineTransport` and take LLM
    answers from ``<fixtures>/llm.json`` when present, otherwise from the
    cache only.
    """
    if offline and transport is None:
        transport = OfflineTransport(fixtures)
    http = make_client(transport, counter)
    if llm is None:
        if offline:
            llm_file = fixtures / "llm.json" if fixtures else None
            llm = (FixtureLlmClient.from_file(llm_file) if llm_file and llm_file.is_file()
                   else CacheOnlyLlmClient())
        else:
            if not config.llm_api_url:
                raise ConfigInvalid("llm_api_url", None, "set LLM_API_URL or use --offline")
            llm = HttpLlmClient(config.llm_api_url, http, config.llm_api_key, sleep=sleep)
    cache = StageCache(config.cache_dir if use_cache else None)
    return Pipeline(config, llm, http, cache, sleep=sleep, rate_limit=not offline)


def run_pipeline(query: InputQuery, config: PipelineConfig, **kwargs) -> ReviewBundle:
    """Run every stage and write all artifacts under ``config.output_dir``."""
    pipe = build_pipeline(config, **kwargs)
    try:
        bundle = pipe.run(query)
    finally:
        pipe.http.close()
    write_outputs(bundle, config)
    return bundle
