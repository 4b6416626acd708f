"""Decoding-mode comparisons on the synthetic calendar dataset.

The experiments train n-gram models on a few hundred examples and decode the
held-out split in every mode.
"""

from collections.abc import Sequence

import pytest

from dataflow_responder.dataflow.calendar import Calendar, calendar_registry
from dataflow_responder.dataflow.graph import execute
from dataflow_responder.dataflow.sexpr import parse_graph
from dataflow_responder.decoding.beam import best_first_search, score_tokens
from dataflow_responder.decoding.pipeline import generate, prepare
from dataflow_responder.evaluation.metrics import evaluate
from dataflow_responder.evaluation.synthetic import DEFAULT_NOW, build_examples, split
from dataflow_responder.grammar.tokens import compile_tokens
from dataflow_responder.lm.ngram import NgramScorer, train_on_texts
from dataflow_responder.lm.prompt import PromptFlags, build_prompt
from dataflow_responder.models import DatasetRecord, EvalExample, GenerateOptions, Mode
from dataflow_responder.transduction.rules import RuleSet
from dataflow_responder.transduction.transducer import load_rules

FULL = PromptFlags()
NO_RESULT = PromptFlags.parse("computation")
ABLATION_SEEDS = (0, 1, 2, 3)


def _prompts(records: Sequence[DatasetRecord], flags: PromptFlags) -> list[str]:
    base = Calendar.load()
    prompts = []
    for record in records:
        registry = calendar_registry(base.copy())
        executed = execute(parse_graph(record.graph), registry, record.now or DEFAULT_NOW)
        prompts.append(build_prompt(executed, flags, record.utterance).text)
    return prompts


def _train(records: Sequence[DatasetRecord], flags: PromptFlags) -> NgramScorer:
    model = train_on_texts([r.gold for r in records], 3, 0.1, _prompts(records, flags))
    return NgramScorer(model)


def _recall(
    records: Sequence[DatasetRecord],
    rules: RuleSet,
    scorer: NgramScorer,
    mode: Mode,
    flags: PromptFlags,
) -> dict[str, float]:
    examples = []
    for record in records:
        options = GenerateOptions(
            now=record.now or DEFAULT_NOW,
            mode=mode,
            seed=0 if mode == Mode.SAMPLE else None,
            prompt=flags,
        )
        result = generate(parse_graph(record.graph), rules, scorer, scorer.model.tokenizer,
                          options, utterance=record.utterance)  # fmt: skip
        examples.append(
            EvalExample(graph=record.graph, gold=record.gold, candidates=result.candidates)
        )
    return evaluate(examples).recall


def _splits(seed: int, rules: RuleSet) -> tuple[list[DatasetRecord], list[DatasetRecord]]:
    return split(build_examples(300, seed=seed, ruleset=rules), seed=seed)


@pytest.fixture(scope="module")
def experiment() -> tuple[list[DatasetRecord], list[DatasetRecord], RuleSet]:
    """Train and test splits of a 300-example dataset."""
    rules = load_rules()
    train, test = _splits(0, rules)
    return train, test, rules


def test_mode_ranking(experiment):
    """Constrained beats unconstrained, which beats sampling from the grammar."""
    train, test, rules = experiment
    scorer = _train(train, FULL)
    recall = {mode: _recall(test, rules, scorer, mode, FULL) for mode in Mode}
    assert recall[Mode.CONSTRAINED]["R@1"] > recall[Mode.UNCONSTRAINED]["R@1"]
    assert recall[Mode.UNCONSTRAINED]["R@1"] > recall[Mode.SAMPLE]["R@1"]
    for mode in Mode:
        assert recall[mode]["R@5"] >= recall[mode]["R@1"]


def test_dropping_the_result_hurts_unconstrained_more():
    """Without the execution result only the grammar keeps responses on track.

    R@1 drops are averaged over several dataset seeds.
    """
    rules = load_rules()
    drops = dict.fromkeys((Mode.CONSTRAINED, Mode.UNCONSTRAINED), 0.0)
    for seed in ABLATION_SEEDS:
        train, test = _splits(seed, rules)
        full, ablated = _train(train, FULL), _train(train, NO_RESULT)
        for mode in drops:
            with_result = _recall(test, rules, full, mode, FULL)["R@1"]
            without = _recall(test, rules, ablated, mode, NO_RESULT)["R@1"]
            drops[mode] += (with_result - without) / len(ABLATION_SEEDS)
    assert drops[Mode.UNCONSTRAINED] > drops[Mode.CONSTRAINED]


@pytest.mark.parametrize("k", [1, 5])
def test_default_search_matches_enumeration_on_fixture_grammars(k):
    """Default constrained generation returns the top-K of scoring every string."""
    rules = load_rules()
    records = build_examples(40, seed=11, ruleset=rules)
    scorer = _train(records[:30], FULL)
    tokenizer = scorer.model.tokenizer
    for record, prompt in zip(records[30:], _prompts(records[30:], FULL), strict=True):
        options = GenerateOptions(now=record.now or DEFAULT_NOW)
        grammar = prepare(parse_graph(record.graph), rules, options).grammar
        language = grammar.enumerate(10_000)
        assert len(language) < 10_000
        tokens = compile_tokens(grammar, tokenizer)
        bound = scorer.prompted(prompt)
        scored = sorted(
            ((score_tokens(tokens, bound, tokenizer.encode(text)), text) for text in language),
            key=lambda pair: (-pair[0], pair[1]),
        )
        expected = [text for _, text in scored[:k]]
        assert best_first_search(tokens, bound, k=k).texts == expected, record.graph
        result = generate(parse_graph(record.graph), rules, scorer, tokenizer,
                          options.model_copy(update={"beam_size": k}),
                          utterance=record.utterance)  # fmt: skip
        assert result.texts == expected, record.graph
        assert [c.score for c in result.candidates] == pytest.approx([s for s, _ in scored[:k]])
