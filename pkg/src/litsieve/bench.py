"""Side-by-side comparison of embedding providers over one corpus."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Sequence

from .arxiv import PaperRecord
from .config import InputQuery
from .embeddings import ProviderDescriptor, RemoteEmbedder, embed_query_and_corpus, query_text
from .errors import LitSieveError
from .relevance import (compute_stats, filter_by_threshold, interpolated_quantile,
                        score_candidates)

logger = logging.getLogger(__name__)


@dataclass
class BenchRow:
    provider_id: str
    threshold: float | None
    skewness: float | None
    min: float | None
    max: float | None
    retained_count: int
    n: int
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


def compare_providers(query: InputQuery, corpus: Sequence[PaperRecord],
                      providers: Sequence[ProviderDescriptor], multiplier: float = 0.5,
                      remote: RemoteEmbedder | None = None
                      ) -> tuple[list[BenchRow], dict[str, list[float]]]:
    """One row per provider, in the given order, plus each provider's scores
    (corpus order). A provider that errors gets a row with ``error`` set and
    no scores; the others still run."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    if not providers:
        raise ValueError("need at least one provider")
    texts = [query_text(p) for p in corpus]
    ids = [p.arxiv_id for p in corpus]
    rows: list[BenchRow] = []
    scores: dict[str, list[float]] = {}
    for desc in providers:
        try:
            qvec, vecs = embed_query_and_corpus(desc, query, texts, remote)
            scored = score_candidates(qvec, ids, vecs)
        except LitSieveError as exc:
            logger.error("provider %s failed: %s", desc.provider_id, exc)
            rows.append(BenchRow(desc.provider_id, None, None, None, None, 0, len(corpus),
                                 error=f"{type(exc).__name__}: {exc}"))
            continue
        values = [s.score for s in scored]
        stats = compute_stats(values, multiplier)
        kept = filter_by_threshold(scored, stats)
        rows.append(BenchRow(desc.provider_id, stats.threshold, stats.skewness, stats.min,
                             stats.max, len(kept), stats.n))
        scores[desc.provider_id] = values
    return rows, scores


def write_bench_csv(rows: Sequence[BenchRow], path: Path) -> None:
    names = [f.name for f in fields(BenchRow)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for r in rows:
            w.writerow(["" if getattr(r, n) is None else _fmt(getattr(r, n)) for n in names])


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def box_summary(values: Sequence[float]) -> tuple[float, float, float, float, float]:
    s = sorted(values)
    return (s[0], interpolated_quantile(s, 0.25), interpolated_quantile(s, 0.5),
            interpolated_quantile(s, 0.75), s[-1])


def emit_plot_data(rows: Sequence[BenchRow], scores: Mapping[str, Sequence[float]],
                   out_dir: Path) -> tuple[Path, Path]:
    """Write ``plot_scores.csv`` (line plot) and ``plot_box.csv`` (box plot)
    for every row that did not fail."""
    live = [r for r in rows if not r.failed]
    for r in live:
        if not scores.get(r.provider_id):
            raise ValueError(f"no scores for provider {r.provider_id!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    line_path, box_path = out_dir / "plot_scores.csv", out_dir / "plot_box.csv"
    with open(line_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "provider_id", "score"])
        for r in live:
            for i, s in enumerate(scores[r.provider_id]):
                w.writerow([i, r.provider_id, repr(float(s))])
    with open(box_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["provider_id", "min", "q1", "median", "q3", "max"])
        for r in live:
            w.writerow([r.provider_id, *(repr(float(v)) for v in box_summary(scores[r.provider_id]))])
    return line_path, box_path
