"""Prompt assembly and answer generation.

Prompts are a fixed deterministic template: preamble, optional few-shot
Q/A pairs, numbered context blocks, then the question. A deterministic
extractive fallback answers offline by picking the context sentence with
the highest token overlap against the question.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .bm25 import tokenize
from .errors import ProviderContractError

if TYPE_CHECKING:
    from .ingest import Chunk

SYSTEM_PREAMBLE = (
    "You are a question answering assistant. Answer concisely, in a few words, "
    "using only the information in the numbered context blocks. If the context "
    "does not contain the answer, answer from your best knowledge."
)

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class GenerationConfig:
    max_new_tokens: int = 256
    top_p: float = 1.0
    few_shot_enabled: bool = True
    n_shots: int = 2
    model: str = "default"

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")


@dataclass(frozen=True)
class PromptBundle:
    system_preamble: str
    few_shot_examples: tuple[tuple[str, str], ...]
    context_blocks: tuple[str, ...]
    context_chunk_ids: tuple[str, ...]
    question: str
    rendered: str


@dataclass(frozen=True)
class Answer:
    text: str
    provenance: tuple[str, ...]  # chunk ids supplied as context
    mode: str  # llm | extractive


def assemble_prompt(
    question: str,
    contexts: "Sequence[Chunk]",
    shots: Sequence[tuple[str, str]],
    cfg: GenerationConfig,
) -> PromptBundle:
    """Render the prompt; shots and contexts appear once, in order."""
    if not question:
        raise ValueError("question must be nonempty")
    shots = tuple(shots) if cfg.few_shot_enabled else ()
    if cfg.few_shot_enabled and len(shots) != cfg.n_shots:
        raise ValueError(f"expected {cfg.n_shots} few-shot examples, got {len(shots)}")

    parts = [SYSTEM_PREAMBLE]
    for shot_q, shot_a in shots:
        parts.append(f"Q: {shot_q}\nA: {shot_a}")
    for i, chunk in enumerate(contexts, start=1):
        parts.append(f"[{i}] {chunk.text}")
    parts.append(f"Q: {question}\nA:")

    return PromptBundle(
        system_preamble=SYSTEM_PREAMBLE,
        few_shot_examples=shots,
        context_blocks=tuple(c.text for c in contexts),
        context_chunk_ids=tuple(c.id for c in contexts),
        question=question,
        rendered="\n\n".join(parts),
    )


class HttpGenerationProvider:
    """Client for the POST /generate wire contract."""

    def __init__(self, base_url: str, model: str):
        from ._http import post_json

        self._post_json = post_json
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.provider_id = model

    def generate(self, prompt: str, max_new_tokens: int, top_p: float) -> str:
        payload = self._post_json(
            f"{self.base_url}/generate",
            {
                "model": self.model,
                "prompt": prompt,
                "max_new_tokens": max_new_tokens,
                "top_p": top_p,
            },
        )
        text = payload.get("text")
        if not isinstance(text, str):
            raise ProviderContractError("malformed /generate response: no text field")
        return text


def generate_answer(provider, bundle: PromptBundle, cfg: GenerationConfig) -> Answer:
    """Run the provider on the rendered prompt."""
    text = provider.generate(bundle.rendered, cfg.max_new_tokens, cfg.top_p).strip()
    if not text:
        raise ProviderContractError("empty generation")
    return Answer(text=text, provenance=bundle.context_chunk_ids, mode="llm")


def split_sentences(text: str) -> list[str]:
    """Split on ./!/? followed by whitespace; pieces keep their punctuation."""
    return [s for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def extractive_fallback(question: str, contexts: "Sequence[Chunk]") -> Answer:
    """Pick the context sentence with the highest token overlap.

    Ties go to the earliest sentence in the highest-ranked chunk; when no
    sentence shares a token with the question, the first sentence of the
    top chunk is returned. Always a substring of some context.
    """
    if not contexts:
        raise ValueError("contexts must be nonempty")
    question_tokens = set(tokenize(question))
    best_sentence = ""
    best_key = (-1, 0, 0)  # (overlap, -chunk rank, -position): maximize
    first_sentence = ""
    for chunk_pos, chunk in enumerate(contexts):
        for sent_pos, sentence in enumerate(split_sentences(chunk.text)):
            if not first_sentence:
                first_sentence = sentence
            overlap = len(question_tokens & set(tokenize(sentence)))
            key = (overlap, -chunk_pos, -sent_pos)
            if key > best_key:
                best_key = key
                best_sentence = sentence
    text = best_sentence if best_key[0] > 0 else first_sentence
    return Answer(
        text=text.strip(),
        provenance=tuple(c.id for c in contexts),
        mode="extractive",
    )
