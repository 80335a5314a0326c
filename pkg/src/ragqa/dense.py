"""Dense retrieval: pluggable embedding providers and exact top-k search.

Search is an exact full scan (no ANN): corpora here are thousands of
chunks, and exactness keeps results oracle-checkable. Scores accumulate
in float64 over the stored float32 vectors so ordering is stable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Protocol, Sequence

import numpy as np

from .bm25 import ScoredHit, tokenize
from .errors import DataError, ProviderContractError

if TYPE_CHECKING:
    from .ingest import Chunk

_MAGIC = b"RQVI"
_VERSION = 1

METRICS = ("inner_product", "cosine")


class EmbeddingProvider(Protocol):
    """Embedding backend contract; embed must be deterministic per provider_id."""

    provider_id: str
    dimension: int
    normalized: bool

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


def _fnv1a32(data: bytes) -> int:
    h = 2166136261
    for byte in data:
        h ^= byte
        h = (h * 16777619) & 0xFFFFFFFF
    return h


class HashedBagOfWordsProvider:
    """Deterministic offline embedder: FNV-1a hashed token counts, L2-normalized.

    Texts with identical token multisets map to identical vectors. Texts
    with no tokens at all fall back to a reserved bucket so the output
    stays unit-norm.
    """

    def __init__(self, dimension: int = 256):
        self.dimension = dimension
        self.provider_id = f"hashed-bow-{dimension}"
        self.normalized = True

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = tokenize(text)
            if not tokens:
                out[row, 0] = 1.0
                continue
            for token in tokens:
                out[row, _fnv1a32(token.encode("utf-8")) % self.dimension] += 1.0
        out /= np.linalg.norm(out, axis=1, keepdims=True)
        return out.astype(np.float32)


class HttpEmbeddingProvider:
    """Client for the POST /embed wire contract.

    Declared dimension and normalization flag are taken from the first
    response; later responses must agree or the contract is broken.
    """

    def __init__(self, base_url: str, model: str, batch_size: int = 64):
        from ._http import post_json  # deferred: keeps offline paths import-light

        self._post_json = post_json
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.provider_id = model
        self.batch_size = batch_size
        self.dimension = 0  # learned from the first response
        self.normalized = False

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        batches = []
        for i in range(0, len(texts), self.batch_size):
            batch = list(texts[i : i + self.batch_size])
            payload = self._post_json(
                f"{self.base_url}/embed", {"model": self.model, "texts": batch}
            )
            try:
                dimension = int(payload["dimension"])
                normalized = bool(payload["normalized"])
                vectors = np.asarray(payload["vectors"], dtype=np.float32)
            except (KeyError, TypeError, ValueError) as exc:
                raise ProviderContractError(f"malformed /embed response: {exc}") from exc
            if vectors.ndim != 2 or vectors.shape != (len(batch), dimension):
                raise ProviderContractError(
                    f"/embed returned shape {vectors.shape}, "
                    f"expected ({len(batch)}, {dimension})"
                )
            if self.dimension == 0:
                self.dimension = dimension
                self.normalized = normalized
            elif dimension != self.dimension:
                raise ProviderContractError(
                    f"embedding dimension changed: declared {self.dimension}, "
                    f"got {dimension}"
                )
            batches.append(vectors)
        return np.concatenate(batches, axis=0)


def embed(provider: EmbeddingProvider, texts: Sequence[str]) -> np.ndarray:
    """Embed texts in order; validates the provider's declared contract."""
    if not texts:
        raise ValueError("texts must be nonempty")
    if any(not t for t in texts):
        raise ValueError("empty text in batch")
    vectors = provider.embed(texts)
    if vectors.shape != (len(texts), provider.dimension):
        raise ProviderContractError(
            f"provider {provider.provider_id} returned shape {vectors.shape}, "
            f"declared dimension {provider.dimension}"
        )
    if provider.normalized:
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ProviderContractError(
                f"provider {provider.provider_id} declares normalized output "
                "but returned non-unit vectors"
            )
    return vectors


@dataclass
class VectorIndex:
    vectors: np.ndarray  # (N, D) float32, chunk-ordered
    chunk_ids: list[str]
    metric: str
    provider_id: str

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise DataError(f"unknown metric {self.metric!r}")
        if self.vectors.shape[0] != len(self.chunk_ids):
            raise DataError("vector count does not match chunk id count")
        if len(set(self.chunk_ids)) != len(self.chunk_ids):
            raise DataError("duplicate chunk ids")


def build_vector_index(
    chunks: "Sequence[Chunk]",
    provider: EmbeddingProvider,
    metric: str = "inner_product",
) -> VectorIndex:
    if not chunks:
        raise DataError("empty corpus")
    vectors = embed(provider, [c.text for c in chunks])
    return VectorIndex(
        vectors=np.ascontiguousarray(vectors, dtype=np.float32),
        chunk_ids=[c.id for c in chunks],
        metric=metric,
        provider_id=provider.provider_id,
    )


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=-1, keepdims=True)
    return np.divide(matrix, norms, out=np.zeros_like(matrix), where=norms > 0)


def vector_search(
    index: VectorIndex, query_vector: np.ndarray, top_k: int = 10
) -> list[ScoredHit]:
    """Exact scan: descending score, ties by ascending chunk id."""
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    query = np.asarray(query_vector, dtype=np.float64).reshape(-1)
    if query.shape[0] != index.dimension:
        raise DataError(
            f"query dimension {query.shape[0]} != index dimension {index.dimension}"
        )
    matrix = index.vectors.astype(np.float64)
    if index.metric == "cosine":
        matrix = _unit_rows(matrix)
        query = _unit_rows(query)
    scores = matrix @ query
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], index.chunk_ids[i]))
    return [
        ScoredHit(
            chunk_id=index.chunk_ids[i],
            score=float(scores[i]),
            rank=rank + 1,
            stage="vector",
        )
        for rank, i in enumerate(order[:top_k])
    ]


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Versioned binary: header, row-major little-endian f32, chunk-id table."""
    meta = json.dumps(
        {
            "provider_id": index.provider_id,
            "metric": index.metric,
            "dimension": index.dimension,
            "count": len(index.chunk_ids),
        }
    ).encode("utf-8")
    ids = json.dumps(index.chunk_ids).encode("utf-8")
    rows = np.ascontiguousarray(index.vectors, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(rows)
        fh.write(struct.pack("<I", len(ids)))
        fh.write(ids)


def load_index(path: str | Path) -> VectorIndex:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read vector index {path}: {exc}") from exc
    if blob[:4] != _MAGIC:
        raise DataError(f"not a vector index file: {path}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != _VERSION:
        raise DataError(
            f"vector index version mismatch: expected {_VERSION}, found {version}"
        )
    (meta_len,) = struct.unpack_from("<I", blob, 8)
    offset = 12
    meta = json.loads(blob[offset : offset + meta_len].decode("utf-8"))
    offset += meta_len
    count, dimension = int(meta["count"]), int(meta["dimension"])
    rows_len = count * dimension * 4
    if offset + rows_len + 4 > len(blob):
        raise DataError(
            f"vector index {path} truncated: header declares {count}x{dimension} "
            f"float32 rows ({rows_len} bytes), file has {len(blob) - offset - 4}"
        )
    vectors = np.frombuffer(
        blob, dtype="<f4", count=count * dimension, offset=offset
    ).reshape(count, dimension)
    offset += rows_len
    (ids_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    chunk_ids = json.loads(blob[offset : offset + ids_len].decode("utf-8"))
    return VectorIndex(
        vectors=np.array(vectors, dtype=np.float32),
        chunk_ids=chunk_ids,
        metric=meta["metric"],
        provider_id=meta["provider_id"],
    )
