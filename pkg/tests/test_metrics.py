from __future__ import annotations

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ragqa.annotation import QAPair
from ragqa.errors import DataError
from ragqa.generation import Answer
from ragqa.metrics import (
    evaluate_run,
    exact_match,
    normalize_answer,
    question_length_bucket,
    render_report_table,
    token_f1,
)


class TestNormalizeAnswer:
    def test_lowercases_and_drops_article(self):
        assert normalize_answer("The Iron City") == "iron city"

    def test_strips_punctuation_and_whitespace(self):
        assert normalize_answer("Hello,   World!") == "hello world"

    def test_empty(self):
        assert normalize_answer("") == ""

    def test_all_articles(self):
        assert normalize_answer("a the an") == ""

    def test_unicode_punctuation(self):
        # em dash and curly quotes are Unicode P* even though they are not ASCII
        assert normalize_answer("“city—hall”") == "cityhall"

    @given(st.text(max_size=80))
    def test_idempotent(self, text):
        once = normalize_answer(text)
        assert normalize_answer(once) == once


class TestTokenF1:
    def test_identical(self):
        assert token_f1("iron city", "iron city") == (1.0, 1.0, 1.0)

    def test_partial_overlap(self):
        p, r, f1 = token_f1("iron city", "iron city brewery")
        assert p == 1.0
        assert r == pytest.approx(2 / 3)
        assert f1 == pytest.approx(0.8, abs=1e-9)

    def test_disjoint(self):
        assert token_f1("cat", "dog") == (0.0, 0.0, 0.0)

    def test_both_empty(self):
        assert token_f1("", "the") == (1.0, 1.0, 1.0)

    def test_one_empty(self):
        assert token_f1("", "answer") == (0.0, 0.0, 0.0)
        assert token_f1("answer", "a") == (0.0, 0.0, 0.0)

    def test_multiset_duplicates_reduce_precision(self):
        # repeated pred token inflates |pred|: common=1, P=1/3, R=1
        p, r, f1 = token_f1("city city city", "city")
        assert p == pytest.approx(1 / 3)
        assert r == 1.0
        assert f1 == pytest.approx(0.5)

    @given(st.text(max_size=40), st.text(max_size=40))
    def test_em_le_f1(self, pred, gold):
        assert exact_match(pred, gold) <= token_f1(pred, gold).f1


class TestExactMatch:
    def test_normalized_equality(self):
        assert exact_match("The Iron City", "iron city") == 1

    def test_subset_is_not_match(self):
        assert exact_match("iron", "iron city") == 0

    def test_empty_pair(self):
        assert exact_match("", "") == 1


def _qa(qa_id, question, answer, ts=0):
    return QAPair(
        id=qa_id, question=question, reference_answer=answer, time_sensitive=ts
    )


def _ans(text):
    return Answer(text=text, provenance=(), mode="extractive")


class TestEvaluateRun:
    def test_perfect_predictions(self):
        qa_set = [_qa("q1", "who?", "alice"), _qa("q2", "where?", "paris", ts=1)]
        answers = {"q1": _ans("alice"), "q2": _ans("paris")}
        report = evaluate_run(qa_set, answers)
        assert report.overall.em == 1.0
        assert report.overall.f1 == 1.0
        for agg in report.by_time_sensitive.values():
            assert agg.f1 == 1.0

    def test_macro_mean(self):
        qa_set = [_qa("q1", "who?", "alice"), _qa("q2", "where?", "paris")]
        answers = {"q1": _ans("alice"), "q2": _ans("rome")}
        report = evaluate_run(qa_set, answers)
        assert report.overall.f1 == pytest.approx(0.5)
        assert report.overall.em == pytest.approx(0.5)

    def test_time_sensitive_strata(self):
        qa_set = [_qa("q1", "a?", "x", ts=0), _qa("q2", "b?", "y", ts=1)]
        answers = {"q1": _ans("x"), "q2": _ans("z")}
        report = evaluate_run(qa_set, answers)
        assert report.by_time_sensitive[0].f1 == 1.0
        assert report.by_time_sensitive[1].f1 == 0.0

    def test_id_mismatch(self):
        qa_set = [_qa("q1", "a?", "x")]
        with pytest.raises(DataError, match="missing"):
            evaluate_run(qa_set, {"q9": _ans("x")})

    def test_stratum_recombination_matches_overall(self):
        rng = random.Random(7)
        qa_set = []
        answers = {}
        words = ["river", "park", "bridge", "festival", "museum", "street"]
        for i in range(40):
            gold = " ".join(rng.choices(words, k=rng.randint(1, 4)))
            pred = " ".join(rng.choices(words, k=rng.randint(1, 4)))
            question = " ".join(rng.choices(words, k=rng.randint(3, 25))) + "?"
            qa_set.append(_qa(f"q{i:02d}", question, gold, ts=rng.randint(0, 1)))
            answers[f"q{i:02d}"] = _ans(pred)
        report = evaluate_run(qa_set, answers)
        for attr in ("em", "precision", "recall", "f1"):
            weighted = sum(
                agg.count * getattr(agg, attr)
                for agg in report.by_time_sensitive.values()
            )
            assert weighted / report.overall.count == pytest.approx(
                getattr(report.overall, attr), abs=1e-9
            )
            weighted = sum(
                agg.count * getattr(agg, attr)
                for agg in report.by_question_length.values()
            )
            assert weighted / report.overall.count == pytest.approx(
                getattr(report.overall, attr), abs=1e-9
            )

    def test_report_ordered_by_qa_id(self):
        qa_set = [_qa("qb", "a?", "x"), _qa("qa", "b?", "y")]
        answers = {"qb": _ans("x"), "qa": _ans("y")}
        report = evaluate_run(qa_set, answers)
        assert [s.qa_id for s in report.per_question] == ["qa", "qb"]

    def test_table_has_metric_columns(self):
        report = evaluate_run([_qa("q1", "a?", "x")], {"q1": _ans("x")})
        table = render_report_table(report)
        for column in ("EM (%)", "Precision (%)", "Recall (%)", "F1 (%)"):
            assert column in table


class TestLengthBucket:
    def test_boundaries(self):
        assert question_length_bucket(" ".join(["w"] * 9)) == "short"
        assert question_length_bucket(" ".join(["w"] * 10)) == "medium"
        assert question_length_bucket(" ".join(["w"] * 20)) == "medium"
        assert question_length_bucket(" ".join(["w"] * 21)) == "long"
