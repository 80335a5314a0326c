"""Model backends behind the gateway endpoints.

Model names select the backend:

* ``hash-bow-<dim>``   — builtin deterministic embedder (FNV-1a hashed
  token counts, L2-normalized); runs anywhere, no weights needed.
* ``token-overlap``    — builtin reranker (token-set Jaccard).
* ``extractive-lite``  — builtin generator: picks the context sentence
  with the best token overlap against the final question of a
  numbered-block prompt; greedy and deterministic.
* ``st:<model>``       — sentence-transformers bi-encoder embedder.
* ``ce:<model>``       — sentence-transformers cross-encoder reranker.
* ``hf:<model>``       — transformers causal LM, greedy decoding.

Real-model backends import their runtimes lazily; a model that cannot be
loaded raises GatewayError so startup aborts with a clear message.
"""

from __future__ import annotations

import math
import re

_TOKEN_RE = re.compile(r"[^\W_]+")
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_HASH_NAME = re.compile(r"hash-bow-(\d+)$")
_CONTEXT_BLOCK = re.compile(r"^\[\d+\] ")


class GatewayError(Exception):
    """Configuration or model-loading failure; aborts startup."""


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _fnv1a32(data: bytes) -> int:
    h = 2166136261
    for byte in data:
        h ^= byte
        h = (h * 16777619) & 0xFFFFFFFF
    return h


class HashEmbedder:
    """Hashed bag-of-words: identical token multisets embed identically."""

    normalized = True

    def __init__(self, name: str, dimension: int):
        self.name = name
        self.dimension = dimension

    def embed(self, texts: list[str]) -> list[list[float]]:
        rows = []
        for text in texts:
            counts = [0.0] * self.dimension
            tokens = _tokens(text)
            if not tokens:
                counts[0] = 1.0
            for token in tokens:
                counts[_fnv1a32(token.encode("utf-8")) % self.dimension] += 1.0
            norm = math.sqrt(sum(c * c for c in counts))
            rows.append([c / norm for c in counts])
        return rows


class SentenceTransformerEmbedder:
    normalized = True

    def __init__(self, name: str, model_id: str):
        self.name = name
        try:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(model_id)
        except Exception as exc:
            raise GatewayError(f"cannot load embed model {model_id!r}: {exc}") from exc
        self.dimension = int(self._model.get_sentence_embedding_dimension())

    def embed(self, texts: list[str]) -> list[list[float]]:
        vectors = self._model.encode(texts, normalize_embeddings=True)
        return [[float(v) for v in row] for row in vectors]


class TokenOverlapReranker:
    def __init__(self, name: str):
        self.name = name

    def score(self, query: str, candidates: list[str]) -> list[float]:
        query_tokens = set(_tokens(query))
        scores = []
        for text in candidates:
            tokens = set(_tokens(text))
            union = query_tokens | tokens
            scores.append(len(query_tokens & tokens) / len(union) if union else 0.0)
        return scores


class CrossEncoderReranker:
    def __init__(self, name: str, model_id: str):
        self.name = name
        try:
            from sentence_transformers import CrossEncoder

            self._model = CrossEncoder(model_id)
        except Exception as exc:
            raise GatewayError(f"cannot load rerank model {model_id!r}: {exc}") from exc

    def score(self, query: str, candidates: list[str]) -> list[float]:
        return [float(s) for s in self._model.predict([(query, c) for c in candidates])]


class ExtractiveLiteGenerator:
    """Deterministic completion for numbered-block QA prompts.

    Context paragraphs are lines starting with "[n] "; the question is
    the last "Q: " line. The best-overlapping context sentence wins,
    truncated to max_new_tokens whitespace tokens. Prompts without that
    structure get a fixed fallback, so output is never empty.
    """

    def __init__(self, name: str):
        self.name = name

    def generate(self, prompt: str, max_new_tokens: int, top_p: float) -> str:
        contexts = [
            _CONTEXT_BLOCK.sub("", par)
            for par in prompt.split("\n\n")
            if _CONTEXT_BLOCK.match(par)
        ]
        questions = re.findall(r"^Q: (.*)$", prompt, flags=re.MULTILINE)
        if questions:
            question = questions[-1]
        else:
            lines = [ln for ln in prompt.strip().splitlines() if ln.strip()]
            question = lines[-1] if lines else ""
        question_tokens = set(_tokens(question))

        best, best_overlap = None, -1
        for ctx in contexts:
            for sentence in _SENTENCE_SPLIT.split(ctx):
                if not sentence.strip():
                    continue
                overlap = len(question_tokens & set(_tokens(sentence)))
                if overlap > best_overlap:
                    best_overlap, best = overlap, sentence.strip()
        if best is None:
            best = "I do not know."
        words = best.split()
        if len(words) > max_new_tokens:
            best = " ".join(words[:max_new_tokens])
        return best


class CausalLmGenerator:
    def __init__(self, name: str, model_id: str):
        self.name = name
        try:
            from transformers import AutoModelForCausalLM, AutoTokenizer

            self._tokenizer = AutoTokenizer.from_pretrained(model_id)
            self._model = AutoModelForCausalLM.from_pretrained(model_id)
        except Exception as exc:
            raise GatewayError(f"cannot load generate model {model_id!r}: {exc}") from exc

    def generate(self, prompt: str, max_new_tokens: int, top_p: float) -> str:
        # greedy decoding keeps fixed-seed runs reproducible; top_p=1
        # means no nucleus truncation anyway
        inputs = self._tokenizer(prompt, return_tensors="pt")
        output = self._model.generate(
            **inputs, max_new_tokens=max_new_tokens, do_sample=False
        )
        new_tokens = output[0][inputs["input_ids"].shape[1]:]
        return self._tokenizer.decode(new_tokens, skip_special_tokens=True)


def load_embedder(name: str):
    match = _HASH_NAME.fullmatch(name)
    if match:
        return HashEmbedder(name, int(match.group(1)))
    if name.startswith("st:"):
        return SentenceTransformerEmbedder(name, name[3:])
    raise GatewayError(f"unknown embed model {name!r}")


def load_reranker(name: str):
    if name == "token-overlap":
        return TokenOverlapReranker(name)
    if name.startswith("ce:"):
        return CrossEncoderReranker(name, name[3:])
    raise GatewayError(f"unknown rerank model {name!r}")


def load_generator(name: str):
    if name == "extractive-lite":
        return ExtractiveLiteGenerator(name)
    if name.startswith("hf:"):
        return CausalLmGenerator(name, name[3:])
    raise GatewayError(f"unknown generate model {name!r}")
