"""Okapi BM25 inverted index over chunks.

IDF uses the nonnegative ln(1 + (N - df + 0.5) / (df + 0.5)) variant, so
every score is >= 0 and terms occurring in more than half the corpus never
get negative weight. Defaults k1=1.2, b=0.75.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from .errors import DataError

if TYPE_CHECKING:
    from .ingest import Chunk

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_LEXICAL_FORMAT = "ragqa-lexical-index"
_LEXICAL_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters.

    No stemming, no stopword removal; shared by indexing, the dense test
    provider and the evaluation length buckets.
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class ScoredHit:
    """One retrieval result: stage tags which pipeline step produced it."""

    chunk_id: str
    score: float
    rank: int
    stage: str  # lexical | vector | fused | reranked


@dataclass
class LexicalIndex:
    chunk_ids: list[str]
    doc_lengths: list[int]
    postings: dict[str, list[tuple[int, int]]]  # term -> [(chunk ref, tf)]
    k1: float = 1.2
    b: float = 0.75

    @property
    def n_chunks(self) -> int:
        return len(self.chunk_ids)

    @property
    def avgdl(self) -> float:
        return sum(self.doc_lengths) / len(self.doc_lengths)

    @property
    def vocabulary(self) -> set[str]:
        return set(self.postings)


def build_lexical_index(
    chunks: "Sequence[Chunk]", k1: float = 1.2, b: float = 0.75
) -> LexicalIndex:
    """Build the inverted index; deterministic for a fixed chunk list."""
    if not chunks:
        raise DataError("empty corpus")
    chunk_ids = [c.id for c in chunks]
    if len(set(chunk_ids)) != len(chunk_ids):
        raise DataError("duplicate chunk ids")

    doc_lengths = []
    postings: dict[str, list[tuple[int, int]]] = defaultdict(list)
    for ref, chunk in enumerate(chunks):
        terms = tokenize(chunk.text)
        doc_lengths.append(len(terms))
        for term, tf in sorted(Counter(terms).items()):
            postings[term].append((ref, tf))
    return LexicalIndex(
        chunk_ids=chunk_ids,
        doc_lengths=doc_lengths,
        postings=dict(postings),
        k1=k1,
        b=b,
    )


def idf(index: LexicalIndex, term: str) -> float:
    """ln(1 + (N - df + 0.5) / (df + 0.5)); always positive for df >= 1."""
    df = len(index.postings.get(term, ()))
    return math.log(1 + (index.n_chunks - df + 0.5) / (df + 0.5))


def lexical_search(index: LexicalIndex, query: str, top_k: int = 10) -> list[ScoredHit]:
    """Score chunks containing at least one query term; top_k by BM25.

    Query terms are summed per occurrence, so a duplicated query token
    contributes twice. Only matching chunks are scored, which with the
    nonnegative IDF means every returned score is > 0. Ties break by
    ascending chunk id.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    scores: dict[int, float] = defaultdict(float)
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        term_idf = idf(index, term)
        for ref, tf in plist:
            dl = index.doc_lengths[ref]
            denom = tf + index.k1 * (1 - index.b + index.b * dl / index.avgdl)
            scores[ref] += term_idf * tf * (index.k1 + 1) / denom
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], index.chunk_ids[kv[0]]))
    return [
        ScoredHit(chunk_id=index.chunk_ids[ref], score=score, rank=i + 1, stage="lexical")
        for i, (ref, score) in enumerate(ranked[:top_k])
    ]


def save_lexical_index(index: LexicalIndex, path: str | Path) -> None:
    """Write the index as versioned JSON; round-trip is lossless."""
    payload = {
        "format": _LEXICAL_FORMAT,
        "version": _LEXICAL_VERSION,
        "k1": index.k1,
        "b": index.b,
        "chunk_ids": index.chunk_ids,
        "doc_lengths": index.doc_lengths,
        "postings": {t: [[ref, tf] for ref, tf in pl] for t, pl in sorted(index.postings.items())},
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_lexical_index(path: str | Path) -> LexicalIndex:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read lexical index {path}: {exc}") from exc
    if payload.get("format") != _LEXICAL_FORMAT:
        raise DataError(f"not a lexical index file: {path}")
    if payload.get("version") != _LEXICAL_VERSION:
        raise DataError(
            f"lexical index version mismatch: expected {_LEXICAL_VERSION}, "
            f"found {payload.get('version')}"
        )
    return LexicalIndex(
        chunk_ids=payload["chunk_ids"],
        doc_lengths=payload["doc_lengths"],
        postings={t: [(ref, tf) for ref, tf in pl] for t, pl in payload["postings"].items()},
        k1=payload["k1"],
        b=payload["b"],
    )
