"""Automatic response metrics: BLEU-4, ROUGE-L and exact-match recall.

All metrics compare strings after :func:`normalize` and split on whitespace.
"""

import logging
from collections.abc import Sequence

from sacrebleu.metrics import BLEU

from dataflow_responder.errors import DatasetError
from dataflow_responder.models import EvalExample, ExampleMetrics, MetricReport

logger = logging.getLogger(__name__)

BLEU_EPSILON = 0.1
DEFAULT_KS = (1, 5)


def normalize(text: str) -> str:
    """Lowercase, collapse whitespace runs to one space and trim."""
    return " ".join(text.lower().split())


def _bleu() -> BLEU:
    # floor smoothing replaces a zero match count c/t by epsilon/t
    return BLEU(
        tokenize="none",
        smooth_method="floor",
        smooth_value=BLEU_EPSILON,
        effective_order=True,
        max_ngram_order=4,
        force=True,
    )


def bleu4(candidates: Sequence[str], references: Sequence[str]) -> float:
    """Corpus BLEU-4 in [0, 1].

    Orders with no candidate n-grams are dropped from the geometric mean;
    orders with candidate n-grams but no matches use precision
    ``BLEU_EPSILON / total``. A corpus without a single matching unigram
    scores 0.

    Raises:
        DatasetError: If the lists are empty or differ in length.
    """
    if len(candidates) != len(references):
        raise DatasetError(
            f"{len(candidates)} candidates but {len(references)} references"
        )
    if not candidates:
        raise DatasetError("BLEU needs at least one pair")
    hyps = [normalize(c) for c in candidates]
    refs = [normalize(r) for r in references]
    score = _bleu().corpus_score(hyps, [refs]).score / 100.0
    return min(1.0, max(0.0, score))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0]
        for j, y in enumerate(b, start=1):
            current.append(previous[j - 1] + 1 if x == y else max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l(candidate: str, reference: str) -> float:
    """ROUGE-L F1 on normalized tokens; two empty strings score 1."""
    cand = normalize(candidate).split()
    ref = normalize(reference).split()
    if not cand and not ref:
        return 1.0
    lcs = lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def match_rank(example: EvalExample) -> int | None:
    """1-based rank of the first candidate equal to the gold response."""
    gold = normalize(example.gold)
    for rank, candidate in enumerate(example.candidates, start=1):
        if normalize(candidate.text) == gold:
            return rank
    return None


def recall_at_k(examples: Sequence[EvalExample], k: int) -> float:
    """Fraction of examples with the gold response among the top ``k`` candidates."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not examples:
        return 0.0
    hits = 0
    for example in examples:
        rank = match_rank(example)
        if rank is not None and rank <= k:
            hits += 1
    return hits / len(examples)


def evaluate(
    examples: Sequence[EvalExample],
    ks: Sequence[int] = DEFAULT_KS,
    ids: Sequence[str | None] | None = None,
) -> MetricReport:
    """Score ranked candidates against gold responses.

    BLEU and ROUGE-L use the best candidate (an empty string when there is none).

    Args:
        examples: Examples with candidates best first.
        ks: Cutoffs for exact-match recall.
        ids: Optional example ids for the breakdown rows.

    Returns:
        The report.

    Raises:
        DatasetError: If there are no examples.
    """
    if not examples:
        raise DatasetError("nothing to evaluate")
    ids = list(ids) if ids is not None else [None] * len(examples)
    tops = [e.candidates[0].text if e.candidates else "" for e in examples]
    golds = [e.gold for e in examples]
    rows = [
        ExampleMetrics(
            id=ident,
            gold=normalize(example.gold),
            top1=normalize(top),
            rouge_l=rouge_l(top, example.gold),
            rank=match_rank(example),
        )
        for ident, example, top in zip(ids, examples, tops, strict=True)
    ]
    report = MetricReport(
        examples=len(examples),
        bleu4=bleu4(tops, golds),
        rouge_l=sum(row.rouge_l for row in rows) / len(rows),
        recall={f"R@{k}": recall_at_k(examples, k) for k in sorted(set(ks))},
        bleu_smoothing={"method": "add-epsilon", "epsilon": BLEU_EPSILON},
        per_example=rows,
    )
    logger.info(
        "evaluated %d examples: BLEU %.4f, ROUGE-L %.4f, %s",
        report.examples,
        report.bleu4,
        report.rouge_l,
        ", ".join(f"{k} {v:.3f}" for k, v in report.recall.items()),
    )
    return report
