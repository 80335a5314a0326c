"""SQuAD-style answer scoring: normalization, EM, token F1, stratified reports.

Normalization lowercases, strips punctuation (Unicode P* categories, so
scores are reproducible bit-for-bit), drops the articles a/an/the, and
collapses whitespace. Token F1 uses multiset intersection, so repeated
tokens in a prediction inflate its length and reduce precision.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Mapping, NamedTuple

from .bm25 import tokenize
from .errors import DataError

if TYPE_CHECKING:
    from .annotation import QAPair
    from .generation import Answer

_ARTICLES = {"a", "an", "the"}

LENGTH_BUCKETS = ("short", "medium", "long")


@lru_cache(maxsize=4096)
def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    lowered = text.lower()
    stripped = "".join(ch for ch in lowered if not _is_punct(ch))
    words = [w for w in stripped.split() if w not in _ARTICLES]
    return " ".join(words)


class TokenF1(NamedTuple):
    precision: float
    recall: float
    f1: float


def token_f1(pred: str, gold: str) -> TokenF1:
    """Token-level precision/recall/F1 over normalized answers.

    Both empty after normalization -> (1, 1, 1); exactly one empty ->
    (0, 0, 0), covering no-answer cases.
    """
    pred_tokens = normalize_answer(pred).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return TokenF1(1.0, 1.0, 1.0)
    if not pred_tokens or not gold_tokens:
        return TokenF1(0.0, 0.0, 0.0)
    common = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if common == 0:
        return TokenF1(0.0, 0.0, 0.0)
    precision = common / len(pred_tokens)
    recall = common / len(gold_tokens)
    return TokenF1(precision, recall, 2 * precision * recall / (precision + recall))


def exact_match(pred: str, gold: str) -> int:
    """1 iff the normalized strings are identical."""
    return int(normalize_answer(pred) == normalize_answer(gold))


def question_length_bucket(question: str) -> str:
    """Bucket a question by token count: short <10, medium 10-20, long >20."""
    n = len(tokenize(question))
    if n < 10:
        return "short"
    if n <= 20:
        return "medium"
    return "long"


@dataclass
class QuestionScore:
    qa_id: str
    em: int
    precision: float
    recall: float
    f1: float
    pred_text: str
    mode: str

    def to_dict(self) -> dict:
        return {
            "qa_id": self.qa_id,
            "em": self.em,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "pred_text": self.pred_text,
            "mode": self.mode,
        }


@dataclass
class StratumAggregate:
    count: int
    em: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "em": self.em,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class EvalReport:
    per_question: list[QuestionScore]
    overall: StratumAggregate
    by_time_sensitive: dict[int, StratumAggregate]
    by_question_length: dict[str, StratumAggregate]
    config_echo: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_question": [q.to_dict() for q in self.per_question],
            "aggregates": {
                "overall": self.overall.to_dict(),
                "time_sensitive": {
                    str(k): v.to_dict() for k, v in self.by_time_sensitive.items()
                },
                "question_length": {
                    k: v.to_dict() for k, v in self.by_question_length.items()
                },
            },
            "config_echo": self.config_echo,
        }


def _aggregate(scores: Iterable[QuestionScore]) -> StratumAggregate:
    rows = list(scores)
    n = len(rows)
    if n == 0:
        return StratumAggregate(0, 0.0, 0.0, 0.0, 0.0)
    return StratumAggregate(
        count=n,
        em=sum(s.em for s in rows) / n,
        precision=sum(s.precision for s in rows) / n,
        recall=sum(s.recall for s in rows) / n,
        f1=sum(s.f1 for s in rows) / n,
    )


def evaluate_run(
    qa_set: "list[QAPair]",
    answers: "Mapping[str, Answer]",
    config_echo: dict | None = None,
) -> EvalReport:
    """Score a run: per-question EM/P/R/F1 plus macro means per stratum.

    ``answers`` maps QA-pair id to the produced Answer; ids must align
    1:1 with ``qa_set``.
    """
    qa_ids = [qa.id for qa in qa_set]
    if len(set(qa_ids)) != len(qa_ids):
        raise DataError("duplicate qa ids in evaluation set")
    missing = sorted(set(qa_ids) - set(answers))
    extra = sorted(set(answers) - set(qa_ids))
    if missing or extra:
        raise DataError(
            f"answers do not align with qa set: missing={missing} extra={extra}"
        )

    per_question = []
    buckets: dict[str, str] = {}
    ts_labels: dict[str, int] = {}
    for qa in qa_set:
        answer = answers[qa.id]
        p, r, f1 = token_f1(answer.text, qa.reference_answer)
        per_question.append(
            QuestionScore(
                qa_id=qa.id,
                em=exact_match(answer.text, qa.reference_answer),
                precision=p,
                recall=r,
                f1=f1,
                pred_text=answer.text,
                mode=answer.mode,
            )
        )
        buckets[qa.id] = question_length_bucket(qa.question)
        ts_labels[qa.id] = qa.time_sensitive
    per_question.sort(key=lambda s: s.qa_id)

    by_ts = {
        label: _aggregate(s for s in per_question if ts_labels[s.qa_id] == label)
        for label in sorted({v for v in ts_labels.values()})
    }
    by_len = {
        bucket: _aggregate(s for s in per_question if buckets[s.qa_id] == bucket)
        for bucket in LENGTH_BUCKETS
        if any(b == bucket for b in buckets.values())
    }
    return EvalReport(
        per_question=per_question,
        overall=_aggregate(per_question),
        by_time_sensitive=by_ts,
        by_question_length=by_len,
        config_echo=dict(config_echo or {}),
    )


def render_report_table(report: EvalReport) -> str:
    """Human-readable table with EM / Precision / Recall / F1 columns."""
    header = f"{'stratum':<22}{'n':>6}{'EM (%)':>10}{'Precision (%)':>15}{'Recall (%)':>13}{'F1 (%)':>10}"
    lines = [header, "-" * len(header)]

    def row(name: str, agg: StratumAggregate) -> str:
        return (
            f"{name:<22}{agg.count:>6}{100 * agg.em:>10.2f}"
            f"{100 * agg.precision:>15.2f}{100 * agg.recall:>13.2f}{100 * agg.f1:>10.2f}"
        )

    lines.append(row("overall", report.overall))
    for label, agg in report.by_time_sensitive.items():
        lines.append(row(f"time_sensitive={label}", agg))
    for bucket, agg in report.by_question_length.items():
        lines.append(row(f"length={bucket}", agg))
    return "\n".join(lines)
