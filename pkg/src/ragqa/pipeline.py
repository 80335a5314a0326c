"""Pipeline configuration and end-to-end query orchestration.

One JSON config file drives every stage. The ablation toggles own the
bits they duplicate: ``toggles.reranker_enabled`` feeds
``FusionConfig.rerank_enabled`` and ``toggles.few_shot_enabled`` feeds
``GenerationConfig.few_shot_enabled``, so the eight ablation rows are
each a single-toggle change. ``--offline`` swaps all three providers for
the bundled deterministic ones (hashed bag-of-words embeddings, token
Jaccard reranking, extractive answers).
"""

from __future__ import annotations

import copy
import hashlib
import importlib.resources
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .annotation import QAPair
from .bm25 import (
    LexicalIndex,
    ScoredHit,
    build_lexical_index,
    lexical_search,
    load_lexical_index,
    save_lexical_index,
)
from .dense import (
    HashedBagOfWordsProvider,
    HttpEmbeddingProvider,
    VectorIndex,
    build_vector_index,
    embed,
    load_index,
    save_index,
    vector_search,
)
from .errors import DataError
from .fusion import FusionConfig, HttpRerankProvider, JaccardRerankProvider, fuse, rerank
from .generation import (
    Answer,
    GenerationConfig,
    HttpGenerationProvider,
    assemble_prompt,
    extractive_fallback,
    generate_answer,
)
from .ingest import Chunk, ChunkingConfig, chunk_document, read_corpus
from .metrics import EvalReport, evaluate_run

MANIFEST_NAME = "manifest.json"
LEXICAL_NAME = "lexical.json"
VECTORS_NAME = "vectors.bin"
CHUNKS_NAME = "chunks.jsonl"

RETRIEVERS = ("lexical", "vector")

DEFAULT_CONFIG: dict = {
    "chunking": {
        "chunk_size": 1000,
        "chunk_overlap": 200,
        "separators": ["\n\n", "\n", " ", ""],
    },
    "bm25": {"k1": 1.2, "b": 0.75},
    "fusion": {
        "lexical_top_k": 10,
        "vector_top_k": 10,
        "weight_lexical": 0.5,
        "weight_vector": 0.5,
        "rrf_k": 60.0,
        "rerank_keep_n": 4,
    },
    "generation": {"max_new_tokens": 256, "top_p": 1.0, "n_shots": 2},
    "vector": {"metric": "inner_product", "offline_dimension": 256},
    "providers": {
        "embed_base_url": "http://localhost:8080",
        "embed_model": "multi-qa-embed",
        "rerank_base_url": "http://localhost:8080",
        "rerank_model": "minilm-rerank",
        "generate_base_url": "http://localhost:8080",
        "generate_model": "mistral-7b",
    },
    "toggles": {
        "rag_enabled": True,
        "reranker_enabled": True,
        "few_shot_enabled": True,
        "ensemble_enabled": True,
    },
    "retriever": "lexical",
    "index_dir": "index",
    "shots_path": None,
}


def _merge_over_defaults(defaults: dict, override: dict, prefix: str = "") -> dict:
    merged = copy.deepcopy(defaults)
    for key, value in override.items():
        dotted = f"{prefix}{key}"
        if key not in merged:
            raise DataError(f"unknown config key: {dotted}")
        if isinstance(merged[key], dict) and isinstance(value, dict):
            merged[key] = _merge_over_defaults(merged[key], value, f"{dotted}.")
        else:
            merged[key] = value
    return merged


def _apply_override(config: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise DataError(f"--set expects key=value, got {assignment!r}")
    dotted, raw_value = assignment.split("=", 1)
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    node = config
    keys = dotted.split(".")
    for key in keys[:-1]:
        if not isinstance(node.get(key), dict):
            raise DataError(f"unknown config key: {dotted}")
        node = node[key]
    if keys[-1] not in node:
        raise DataError(f"unknown config key: {dotted}")
    node[keys[-1]] = value


def resolve_config_dict(path: str | Path | None = None, overrides: list[str] | None = None) -> dict:
    """Defaults <- config file <- --set overrides, validated key by key."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise DataError(f"config root must be a JSON object: {path}")
        config = _merge_over_defaults(config, loaded)
    for assignment in overrides or []:
        _apply_override(config, assignment)
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ProviderEndpoints:
    embed_base_url: str
    embed_model: str
    rerank_base_url: str
    rerank_model: str
    generate_base_url: str
    generate_model: str


@dataclass(frozen=True)
class Toggles:
    rag_enabled: bool = True
    reranker_enabled: bool = True
    few_shot_enabled: bool = True
    ensemble_enabled: bool = True


@dataclass
class PipelineConfig:
    chunking: ChunkingConfig
    fusion: FusionConfig
    generation: GenerationConfig
    providers: ProviderEndpoints
    toggles: Toggles
    k1: float
    b: float
    metric: str
    offline_dimension: int
    retriever: str
    index_dir: str
    shots_path: str | None
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, config: dict) -> "PipelineConfig":
        toggles = Toggles(**config["toggles"])
        if config["retriever"] not in RETRIEVERS:
            raise DataError(f"retriever must be one of {RETRIEVERS}")
        fusion = FusionConfig(
            rerank_enabled=toggles.reranker_enabled, **config["fusion"]
        )
        generation = GenerationConfig(
            few_shot_enabled=toggles.few_shot_enabled,
            model=config["providers"]["generate_model"],
            **config["generation"],
        )
        chunking = ChunkingConfig(
            chunk_size=config["chunking"]["chunk_size"],
            chunk_overlap=config["chunking"]["chunk_overlap"],
            separators=tuple(config["chunking"]["separators"]),
        )
        return cls(
            chunking=chunking,
            fusion=fusion,
            generation=generation,
            providers=ProviderEndpoints(**config["providers"]),
            toggles=toggles,
            k1=config["bm25"]["k1"],
            b=config["bm25"]["b"],
            metric=config["vector"]["metric"],
            offline_dimension=config["vector"]["offline_dimension"],
            retriever=config["retriever"],
            index_dir=config["index_dir"],
            shots_path=config["shots_path"],
            raw=config,
        )

    def echo(self, offline: bool) -> dict:
        echoed = copy.deepcopy(self.raw)
        echoed["offline"] = offline
        return echoed


def load_config(
    path: str | Path | None = None, overrides: list[str] | None = None
) -> PipelineConfig:
    return PipelineConfig.from_dict(resolve_config_dict(path, overrides))


def load_few_shot_examples(path: str | Path | None, n_shots: int) -> list[tuple[str, str]]:
    """Few-shot exemplars ship as an editable data file, not code."""
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read shots file {path}: {exc}") from exc
    else:
        resource = importlib.resources.files("ragqa").joinpath(
            "data/few_shot_examples.json"
        )
        data = json.loads(resource.read_text(encoding="utf-8"))
    try:
        pairs = [(str(rec["question"]), str(rec["answer"])) for rec in data]
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed shots file: {exc}") from exc
    if len(pairs) < n_shots:
        raise DataError(f"need {n_shots} few-shot examples, file has {len(pairs)}")
    return pairs[:n_shots]


def _write_chunks(chunks: list[Chunk], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(
                json.dumps(
                    {
                        "id": c.id,
                        "doc_id": c.doc_id,
                        "ordinal": c.ordinal,
                        "text": c.text,
                        "char_start": c.char_start,
                        "char_end": c.char_end,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def _read_chunks(path: Path) -> list[Chunk]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read chunk store {path}: {exc}") from exc
    chunks = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            chunks.append(Chunk(**json.loads(line)))
        except (json.JSONDecodeError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: malformed chunk line: {exc}") from exc
    return chunks


def make_embed_provider(cfg: PipelineConfig, offline: bool):
    if offline:
        return HashedBagOfWordsProvider(cfg.offline_dimension)
    return HttpEmbeddingProvider(cfg.providers.embed_base_url, cfg.providers.embed_model)


def build_indexes(corpus_path: str | Path, cfg: PipelineConfig, offline: bool) -> dict:
    """Chunk the corpus and persist lexical + vector indexes plus manifest."""
    documents = read_corpus(corpus_path)
    if not documents:
        raise DataError(f"empty corpus: {corpus_path}")
    chunks = [c for doc in documents for c in chunk_document(doc, cfg.chunking)]

    lexical = build_lexical_index(chunks, k1=cfg.k1, b=cfg.b)
    provider = make_embed_provider(cfg, offline)
    vectors = build_vector_index(chunks, provider, metric=cfg.metric)

    index_dir = Path(cfg.index_dir)
    index_dir.mkdir(parents=True, exist_ok=True)
    save_lexical_index(lexical, index_dir / LEXICAL_NAME)
    save_index(vectors, index_dir / VECTORS_NAME)
    _write_chunks(chunks, index_dir / CHUNKS_NAME)
    manifest = {
        "format": "ragqa-index-manifest",
        "version": 1,
        "doc_count": len(documents),
        "chunk_count": len(chunks),
        "provider_id": provider.provider_id,
        "metric": cfg.metric,
        "config_hash": config_hash(cfg.raw),
    }
    (index_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


class Pipeline:
    """Retrieval + generation for one configured run."""

    def __init__(self, cfg: PipelineConfig, offline: bool = False):
        self.cfg = cfg
        self.offline = offline
        self.stats = {"retrievals": 0, "generations": 0}
        self.embed_provider = make_embed_provider(cfg, offline)
        self.rerank_provider = (
            JaccardRerankProvider()
            if offline
            else HttpRerankProvider(cfg.providers.rerank_base_url, cfg.providers.rerank_model)
        )
        self.generate_provider = (
            None
            if offline
            else HttpGenerationProvider(
                cfg.providers.generate_base_url, cfg.providers.generate_model
            )
        )
        self._lexical: LexicalIndex | None = None
        self._vectors: VectorIndex | None = None
        self._chunks: dict[str, Chunk] = {}
        self._shots: list[tuple[str, str]] | None = None

    def load_indexes(self) -> None:
        index_dir = Path(self.cfg.index_dir)
        if not (index_dir / MANIFEST_NAME).exists():
            raise DataError(f"no index found in {index_dir} (run `ragqa index` first)")
        self._lexical = load_lexical_index(index_dir / LEXICAL_NAME)
        self._vectors = load_index(index_dir / VECTORS_NAME)
        self._chunks = {c.id: c for c in _read_chunks(index_dir / CHUNKS_NAME)}
        if self._vectors.provider_id != self.embed_provider.provider_id:
            raise DataError(
                f"vector index was built with provider "
                f"{self._vectors.provider_id!r}, configured provider is "
                f"{self.embed_provider.provider_id!r}"
            )

    def _require_indexes(self) -> None:
        if self._lexical is None:
            self.load_indexes()

    def chunk(self, chunk_id: str) -> Chunk:
        self._require_indexes()
        try:
            return self._chunks[chunk_id]
        except KeyError as exc:
            raise DataError(f"unknown chunk id {chunk_id!r}") from exc

    def retrieve(self, question: str) -> list[ScoredHit]:
        """Candidate contexts for one question, per the configured toggles."""
        self._require_indexes()
        f = self.cfg.fusion
        if self.cfg.toggles.ensemble_enabled:
            lexical_hits = lexical_search(self._lexical, question, f.lexical_top_k)
            self.stats["retrievals"] += 1
            query_vec = embed(self.embed_provider, [question])[0]
            vector_hits = vector_search(self._vectors, query_vec, f.vector_top_k)
            self.stats["retrievals"] += 1
            candidates = fuse(lexical_hits, vector_hits, f)
        elif self.cfg.retriever == "lexical":
            candidates = lexical_search(self._lexical, question, f.lexical_top_k)
            self.stats["retrievals"] += 1
        else:
            query_vec = embed(self.embed_provider, [question])[0]
            candidates = vector_search(self._vectors, query_vec, f.vector_top_k)
            self.stats["retrievals"] += 1

        if f.rerank_enabled and candidates:
            texts = {h.chunk_id: self._chunks[h.chunk_id].text for h in candidates}
            return rerank(self.rerank_provider, question, candidates, texts, f.rerank_keep_n)
        return candidates[: f.rerank_keep_n]

    def shots(self) -> list[tuple[str, str]]:
        if self._shots is None:
            self._shots = load_few_shot_examples(
                self.cfg.shots_path, self.cfg.generation.n_shots
            )
        return self._shots

    def answer(self, question: str) -> tuple[Answer, list[ScoredHit]]:
        """Full pipeline for one question: retrieve, prompt, generate."""
        hits = self.retrieve(question) if self.cfg.toggles.rag_enabled else []
        contexts = [self._chunks[h.chunk_id] for h in hits]
        shots = self.shots() if self.cfg.toggles.few_shot_enabled else []
        bundle = assemble_prompt(question, contexts, shots, self.cfg.generation)
        if self.offline:
            if contexts:
                answer = extractive_fallback(question, contexts)
            else:
                # non-RAG baseline has nothing to extract from
                answer = Answer(text="", provenance=(), mode="extractive")
        else:
            answer = generate_answer(self.generate_provider, bundle, self.cfg.generation)
        self.stats["generations"] += 1
        return answer, hits

    def evaluate(self, qa_pairs: list[QAPair]) -> EvalReport:
        """Answer every question and score the run; ordered by qa id."""
        answers: Mapping[str, Answer] = {
            qa.id: self.answer(qa.question)[0] for qa in qa_pairs
        }
        return evaluate_run(qa_pairs, answers, self.cfg.echo(self.offline))
