"""Cosine scoring and the Q3 + k*IQR retention threshold."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

from .embeddings import EmbeddingVector
from .errors import DimensionMismatch, EmptyScores, ZeroVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredPaper:
    arxiv_id: str
    score: float


@dataclass(frozen=True)
class DistributionStats:
    n: int
    min: float
    max: float
    q1: float
    q3: float
    iqr: float
    threshold: float
    skewness: float

    def to_json(self) -> dict:
        return asdict(self)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimensionMismatch(f"cosine of dim {a.dim} vs {b.dim}")
    sa = max(abs(x) for x in a.values)
    sb = max(abs(x) for x in b.values)
    if sa == 0.0 or sb == 0.0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    # rescale by the max magnitude so squares neither underflow nor overflow
    xa = [x / sa for x in a.values]
    xb = [x / sb for x in b.values]
    na = math.sqrt(math.fsum(x * x for x in xa))
    nb = math.sqrt(math.fsum(x * x for x in xb))
    dot = math.fsum(x * y for x, y in zip(xa, xb))
    return max(-1.0, min(1.0, dot / (na * nb)))


def interpolated_quantile(sorted_values: Sequence[float], p: float) -> float:
    """Linear interpolation at position ``p * (n - 1)`` of ascending values."""
    pos = p * (len(sorted_values) - 1)
    lo = math.floor(pos)
    frac = pos - lo
    if frac == 0.0 or lo + 1 >= len(sorted_values):
        return sorted_values[lo]
    a, b = sorted_values[lo], sorted_values[lo + 1]
    return a + (b - a) * frac


def skewness(values: Sequence[float]) -> float:
    """Population Fisher-Pearson coefficient m3 / m2**1.5; 0 when m2 == 0."""
    n = len(values)
    if n == 0 or min(values) == max(values):
        return 0.0
    mean = math.fsum(values) / n
    dev = [x - mean for x in values]
    m2 = math.fsum(d * d for d in dev) / n
    denom = m2 ** 1.5
    if denom == 0.0:  # m2 zero or underflowing
        return 0.0
    m3 = math.fsum(d * d * d for d in dev) / n
    return m3 / denom


def compute_stats(scores: Iterable[float], multiplier: float = 0.5) -> DistributionStats:
    values = sorted(float(s) for s in scores)
    if not values:
        raise EmptyScores("need at least one score")
    if not all(math.isfinite(v) for v in values):
        raise ValueError("scores must be finite")
    q1 = interpolated_quantile(values, 0.25)
    q3 = interpolated_quantile(values, 0.75)
    iqr = q3 - q1
    return DistributionStats(
        n=len(values), min=values[0], max=values[-1], q1=q1, q3=q3, iqr=iqr,
        threshold=q3 + multiplier * iqr, skewness=skewness(values),
    )


def filter_by_threshold(scored: Iterable[ScoredPaper], stats: DistributionStats) -> list[ScoredPaper]:
    """Keep scores >= threshold, best first; ties by ascending id."""
    kept = [s for s in scored if s.score >= stats.threshold]
    kept.sort(key=lambda s: (-s.score, s.arxiv_id))
    return kept


def score_candidates(query_vec: EmbeddingVector, ids: Sequence[str],
                     vectors: Sequence[EmbeddingVector]) -> list[ScoredPaper]:
    """Cosine score per candidate. Zero-vector candidates score 0 with a warning;
    a zero query vector raises ``ZeroVector``."""
    if not any(query_vec.values):
        raise ZeroVector("query embedding is the zero vector")
    out = []
    for ident, vec in zip(ids, vectors, strict=True):
        try:
            s = cosine(query_vec, vec)
        except ZeroVector:
            logger.warning("candidate %s has a zero embedding; scoring it 0", ident)
            s = 0.0
        out.append(ScoredPaper(ident, s))
    return out
