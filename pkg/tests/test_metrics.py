"""Tests for BLEU-4, ROUGE-L and exact-match recall."""

import math

import pytest

from dataflow_responder.errors import DatasetError
from dataflow_responder.evaluation.metrics import (
    bleu4,
    evaluate,
    lcs_length,
    normalize,
    recall_at_k,
    rouge_l,
)
from dataflow_responder.models import Candidate, EvalExample


def _example(gold: str, *texts: str) -> EvalExample:
    candidates = [Candidate(text=t, score=-float(i)) for i, t in enumerate(texts)]
    return EvalExample(graph="(today)", gold=gold, candidates=candidates)


def test_normalize():
    """Case and whitespace runs are folded."""
    assert normalize("  Yes ,\tI  found\nONE event ") == "yes , i found one event"


def test_bleu_identity():
    """Identical corpora score one."""
    texts = ["Yes , I found one event tomorrow .", "No , your calendar is clear on Wednesday ."]
    assert bleu4(texts, texts) == pytest.approx(1.0)
    assert bleu4(["YES  you do"], ["yes you do"]) == pytest.approx(1.0)


def test_bleu_brevity_penalty():
    """Short candidates with perfect precisions pay only the brevity penalty."""
    assert bleu4(["the cat sat"], ["the cat sat down"]) == pytest.approx(
        math.exp(1 - 4 / 3), abs=1e-9
    )


def test_bleu_smoothed_precisions():
    """Zero higher-order matches fall back to epsilon over the n-gram count."""
    expected = math.exp(1 - 6 / 4) * (0.75 * (1 / 3) * (0.1 / 2) * (0.1 / 1)) ** 0.25
    assert bleu4(["the cat the cat"], ["the cat sat on the mat"]) == pytest.approx(
        expected, abs=1e-9
    )


def test_bleu_without_matches():
    """No shared words, no score."""
    assert bleu4(["a b c d"], ["w x y z"]) == 0.0


def test_bleu_input_errors():
    """Corpora must be non-empty and aligned."""
    with pytest.raises(DatasetError):
        bleu4([], [])
    with pytest.raises(DatasetError):
        bleu4(["a"], ["a", "b"])


def test_rouge_l():
    """ROUGE-L is the F1 of the longest common subsequence."""
    assert lcs_length("a b c d".split(), "a c d e".split()) == 3
    assert rouge_l("a b c d", "a c d e") == pytest.approx(0.75)
    assert rouge_l("A  B", "a b") == 1.0
    assert rouge_l("", "") == 1.0
    assert rouge_l("", "a") == 0.0
    assert rouge_l("x y", "a b") == 0.0


def test_recall_at_k():
    """The gold must appear among the first k candidates."""
    examples = [
        _example("yes", "Yes", "no"),
        _example("no", "yes", "No"),
        _example("maybe", "yes", "no"),
    ]
    assert recall_at_k(examples, 1) == pytest.approx(1 / 3)
    assert recall_at_k(examples, 2) == pytest.approx(2 / 3)
    assert recall_at_k(examples, 5) == pytest.approx(2 / 3)
    assert recall_at_k([], 1) == 0.0
    with pytest.raises(ValueError):
        recall_at_k(examples, 0)


def test_evaluate_report():
    """Reports carry corpus scores, recall by cutoff and per-example rows."""
    examples = [
        _example("Yes , you do .", "yes , you do .", "No ."),
        _example("No , you don't .", "Yes , you do .", "No , you don't ."),
        _example("Nothing"),
    ]
    report = evaluate(examples, ks=[2, 1], ids=["a", "b", "c"])
    assert report.examples == 3
    assert report.recall == {"R@1": pytest.approx(1 / 3), "R@2": pytest.approx(2 / 3)}
    assert [row.rank for row in report.per_example] == [1, 2, None]
    assert [row.id for row in report.per_example] == ["a", "b", "c"]
    assert report.per_example[2].top1 == ""
    assert report.per_example[0].rouge_l == 1.0
    assert 0.0 < report.bleu4 < 1.0
    assert report.bertscore is None
    assert report.bleu_smoothing["epsilon"] == 0.1


def test_evaluate_perfect_predictions():
    """Gold responses as predictions score one everywhere."""
    golds = ["Yes , you do .", "You have 3 events on Friday ."]
    report = evaluate([_example(g, g) for g in golds])
    assert report.bleu4 == pytest.approx(1.0)
    assert report.rouge_l == 1.0
    assert report.recall == {"R@1": 1.0, "R@5": 1.0}


def test_evaluate_needs_examples():
    """Empty evaluations are dataset errors."""
    with pytest.raises(DatasetError):
        evaluate([])
