"""QA-pair generation via the LLM provider and inter-annotator agreement.

IAA is the mean pairwise token F1 between two answer sources, computed
with the same normalization as evaluation so that format-only
disagreements ("Iron City" vs "The Iron City") do not count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from .errors import DataError
from .generation import GenerationConfig
from .metrics import token_f1

if TYPE_CHECKING:
    from .ingest import Chunk

ORIGINS = ("manual", "generated")


@dataclass(frozen=True)
class QAPair:
    id: str
    question: str
    reference_answer: str
    time_sensitive: int  # 1 when the correct answer depends on when it is asked
    source_doc_id: str | None = None
    origin: str = "manual"

    def __post_init__(self) -> None:
        if not self.question or not self.reference_answer:
            raise DataError(f"qa pair {self.id!r} has empty question or answer")
        if self.time_sensitive not in (0, 1):
            raise DataError(f"qa pair {self.id!r}: time_sensitive must be 0 or 1")
        if self.origin not in ORIGINS:
            raise DataError(f"qa pair {self.id!r}: unknown origin {self.origin!r}")


@dataclass
class AnnotationReport:
    generated: int = 0
    parse_failures: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)


def _render_generation_prompt(
    chunk_text: str, exemplars: Sequence[QAPair], n_per_chunk: int
) -> str:
    lines = [
        f"Write {n_per_chunk} question-answer pair(s) about the passage below.",
        "Use exactly this format, one question per 'Q:' line and its answer",
        "on the following 'A:' line.",
        "",
    ]
    for ex in exemplars:
        lines.append(f"Q: {ex.question}")
        lines.append(f"A: {ex.reference_answer}")
    lines.extend(["", "Passage:", chunk_text])
    return "\n".join(lines)


def parse_qa_output(text: str) -> list[tuple[str, str]]:
    """Extract (question, answer) pairs from Q:/A: marker lines."""
    pairs = []
    pending_question: str | None = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.lower().startswith("q:"):
            pending_question = stripped[2:].strip()
        elif stripped.lower().startswith("a:") and pending_question:
            answer = stripped[2:].strip()
            if answer:
                pairs.append((pending_question, answer))
            pending_question = None
    return pairs


def generate_qa_pairs(
    provider,
    chunks: "Sequence[Chunk]",
    exemplars: Sequence[QAPair],
    n_per_chunk: int = 1,
    cfg: GenerationConfig | None = None,
) -> tuple[list[QAPair], AnnotationReport]:
    """Prompt the provider once per chunk and parse Q:/A: pairs.

    Generated pairs default to time_sensitive=0 (labels are a manual
    pass). Provider failures and unparseable outputs are counted, never
    raised.
    """
    if not exemplars:
        raise ValueError("exemplars must be nonempty")
    if not chunks:
        raise ValueError("chunks must be nonempty")
    cfg = cfg or GenerationConfig()
    report = AnnotationReport()
    pairs: list[QAPair] = []
    for chunk in chunks:
        prompt = _render_generation_prompt(chunk.text, exemplars, n_per_chunk)
        try:
            output = provider.generate(prompt, cfg.max_new_tokens, cfg.top_p)
        except Exception as exc:
            report.errors.append((chunk.id, str(exc)))
            continue
        parsed = parse_qa_output(output)[:n_per_chunk]
        if not parsed:
            report.parse_failures += 1
            continue
        for k, (question, answer) in enumerate(parsed):
            pairs.append(
                QAPair(
                    id=f"{chunk.id}:g{k}",
                    question=question,
                    reference_answer=answer,
                    time_sensitive=0,
                    source_doc_id=chunk.doc_id,
                    origin="generated",
                )
            )
            report.generated += 1
    return pairs, report


def compute_iaa(pairs: Sequence[tuple[str, str]]) -> float:
    """Mean pairwise token F1 between two annotation sources."""
    if not pairs:
        raise DataError("cannot compute agreement over an empty pair list")
    return sum(token_f1(a, b).f1 for a, b in pairs) / len(pairs)


def write_qa_pairs(pairs: Sequence[QAPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qa in pairs:
            fh.write(
                json.dumps(
                    {
                        "id": qa.id,
                        "question": qa.question,
                        "reference_answer": qa.reference_answer,
                        "time_sensitive": qa.time_sensitive,
                        "source_doc_id": qa.source_doc_id,
                        "origin": qa.origin,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_qa_pairs(path: str | Path) -> list[QAPair]:
    """Read the QA JSONL format; malformed lines name their line number."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read qa file {path}: {exc}") from exc
    pairs = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            pairs.append(
                QAPair(
                    id=str(rec["id"]),
                    question=rec["question"],
                    reference_answer=rec["reference_answer"],
                    time_sensitive=int(rec["time_sensitive"]),
                    source_doc_id=rec.get("source_doc_id"),
                    origin=rec.get("origin", "manual"),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: malformed qa line: {exc}") from exc
    return pairs


def read_iaa_pairs(path: str | Path) -> list[tuple[str, str]]:
    """Read IAA input JSONL: {question, answer_a, answer_b} per line."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read iaa file {path}: {exc}") from exc
    pairs = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            pairs.append((str(rec["answer_a"]), str(rec["answer_b"])))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: malformed iaa line: {exc}") from exc
    return pairs
