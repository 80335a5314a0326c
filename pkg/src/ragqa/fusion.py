"""Weighted reciprocal rank fusion of lexical and vector hits, plus reranking.

RRF is used instead of raw-score mixing because BM25 and inner-product
scores live on incommensurable scales; rank-based fusion needs no
calibration: fused(d) = sum over lists containing d of w / (k + rank).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

from .bm25 import ScoredHit, tokenize
from .errors import DataError, ProviderContractError


@dataclass(frozen=True)
class FusionConfig:
    lexical_top_k: int = 10
    vector_top_k: int = 10
    weight_lexical: float = 0.5
    weight_vector: float = 0.5
    rrf_k: float = 60.0
    rerank_enabled: bool = True
    rerank_keep_n: int = 4

    def __post_init__(self) -> None:
        if self.weight_lexical < 0 or self.weight_vector < 0:
            raise DataError("fusion weights must be >= 0")
        if self.weight_lexical + self.weight_vector <= 0:
            raise DataError("at least one fusion weight must be positive")
        if self.rrf_k <= 0:
            raise DataError("rrf_k must be > 0")
        if self.rerank_keep_n < 1:
            raise DataError("rerank_keep_n must be >= 1")
        if self.lexical_top_k < 1 or self.vector_top_k < 1:
            raise DataError("retriever depths must be >= 1")


def fuse(
    lexical_hits: Sequence[ScoredHit],
    vector_hits: Sequence[ScoredHit],
    cfg: FusionConfig,
) -> list[ScoredHit]:
    """Fuse two ranked lists; output membership is the union of inputs."""
    fused: dict[str, float] = defaultdict(float)
    for hits, weight in (
        (lexical_hits, cfg.weight_lexical),
        (vector_hits, cfg.weight_vector),
    ):
        for hit in hits:
            fused[hit.chunk_id] += weight / (cfg.rrf_k + hit.rank)
    ranked = sorted(fused.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        ScoredHit(chunk_id=cid, score=score, rank=i + 1, stage="fused")
        for i, (cid, score) in enumerate(ranked)
    ]


class RerankProvider(Protocol):
    """Second-stage scorer; scores must be deterministic for fixed inputs."""

    provider_id: str

    def score(self, query: str, candidates: Sequence[str]) -> list[float]: ...


class JaccardRerankProvider:
    """Deterministic offline reranker: token-set Jaccard with the query."""

    provider_id = "token-jaccard"

    def score(self, query: str, candidates: Sequence[str]) -> list[float]:
        query_tokens = set(tokenize(query))
        scores = []
        for text in candidates:
            tokens = set(tokenize(text))
            union = query_tokens | tokens
            scores.append(len(query_tokens & tokens) / len(union) if union else 0.0)
        return scores


class HttpRerankProvider:
    """Client for the POST /rerank wire contract."""

    def __init__(self, base_url: str, model: str):
        from ._http import post_json

        self._post_json = post_json
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.provider_id = model

    def score(self, query: str, candidates: Sequence[str]) -> list[float]:
        payload = self._post_json(
            f"{self.base_url}/rerank",
            {"model": self.model, "query": query, "candidates": list(candidates)},
        )
        try:
            scores = [float(s) for s in payload["scores"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderContractError(f"malformed /rerank response: {exc}") from exc
        return scores


def rerank(
    provider: RerankProvider,
    query: str,
    hits: Sequence[ScoredHit],
    chunk_texts: Mapping[str, str],
    keep_n: int,
) -> list[ScoredHit]:
    """Keep the top keep_n candidates by provider score.

    Ties preserve the incoming (fused) order; provider scores replace the
    fused scores on the output hits.
    """
    if not hits:
        raise ValueError("hits must be nonempty")
    if keep_n < 1:
        raise ValueError("keep_n must be >= 1")
    try:
        candidates = [chunk_texts[h.chunk_id] for h in hits]
    except KeyError as exc:
        raise DataError(f"no text for chunk {exc}") from exc
    scores = provider.score(query, candidates)
    if len(scores) != len(candidates):
        raise ProviderContractError(
            f"reranker returned {len(scores)} scores for {len(candidates)} candidates"
        )
    order = sorted(range(len(hits)), key=lambda i: (-scores[i], i))
    return [
        ScoredHit(chunk_id=hits[i].chunk_id, score=scores[i], rank=r + 1, stage="reranked")
        for r, i in enumerate(order[:keep_n])
    ]
