"""Tests for constrained, best-first and unconstrained search."""

import pytest

from dataflow_responder.decoding.beam import (
    Hypothesis,
    best_first_search,
    constrained_beam_search,
    score_tokens,
    unconstrained_beam_search,
)
from dataflow_responder.errors import EmptyLanguage, IllegalToken, NoCompletion
from dataflow_responder.grammar.tokens import TokenGrammar, compile_tokens
from dataflow_responder.lm.ngram import NgramScorer, train_ngram
from dataflow_responder.lm.scorers import LmScorer, ScriptedScorer, UniformScorer
from dataflow_responder.lm.tokenizer import Tokenizer
from dataflow_responder.models import Mode

TRAINING = ["hello world", "hi there friend", "hello big world", "hello friend", "hi there world"]


@pytest.fixture
def setup(greeting_grammar) -> tuple[TokenGrammar, LmScorer, list[str]]:
    """Greeting token grammar, a bigram scorer over its words and its language."""
    tokenizer = Tokenizer.word_level(greeting_grammar.sigma)
    corpus = [tokenizer.encode(text) for text in TRAINING]
    scorer = NgramScorer(train_ngram(corpus, order=2, k=0.5, tokenizer=tokenizer))
    return compile_tokens(greeting_grammar, tokenizer), scorer, greeting_grammar.enumerate(100)


def _oracle(grammar: TokenGrammar, scorer: LmScorer, language: list[str], alpha: float = 0.0):
    scored = []
    for text in language:
        tokens = grammar.tokenizer.encode(text)
        logprob = score_tokens(grammar, scorer, tokens)
        scored.append((Hypothesis(tuple(tokens), logprob).score(alpha), text))
    return sorted(scored, key=lambda pair: (-pair[0], pair[1]))


@pytest.mark.parametrize("k", [1, 5])
def test_best_first_is_exact(setup, k):
    """Best-first search returns the brute-force top-K."""
    grammar, scorer, language = setup
    expected = _oracle(grammar, scorer, language)[:k]
    result = best_first_search(grammar, scorer, k=k)
    assert result.texts == [text for _, text in expected]
    assert [c.score for c in result.candidates] == pytest.approx([s for s, _ in expected])
    assert result.mode == Mode.CONSTRAINED


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_wide_beam_is_exact(setup, alpha):
    """A beam as wide as the language prunes nothing."""
    grammar, scorer, language = setup
    expected = _oracle(grammar, scorer, language, alpha)
    result = constrained_beam_search(grammar, scorer, k=len(language), length_norm=alpha)
    assert result.texts == [text for _, text in expected]
    assert [c.score for c in result.candidates] == pytest.approx([s for s, _ in expected])
    assert result.diagnostics["pruned"] == 0


def test_narrow_beam_stays_in_language(setup):
    """Narrow beams may miss the optimum but never leave the grammar."""
    grammar, scorer, language = setup
    result = constrained_beam_search(grammar, scorer, k=1)
    assert len(result.candidates) == 1
    assert result.texts[0] in language
    assert {"steps", "expanded", "pruned"} <= set(result.diagnostics)


def test_unnormalized_scores(setup):
    """Turning renormalization off scores with raw conditionals."""
    grammar, scorer, _ = setup
    tokens = grammar.tokenizer.encode("hello world")
    raw = score_tokens(grammar, scorer, tokens, renormalize=False)
    assert raw == pytest.approx(score_tokens(None, scorer, tokens))
    assert raw < score_tokens(grammar, scorer, tokens)


def test_scripted_scorer_wins(greeting_grammar):
    """A scorer scripted on a sentence ranks it first."""
    tokenizer = Tokenizer.word_level(greeting_grammar.sigma)
    grammar = compile_tokens(greeting_grammar, tokenizer)
    scorer = ScriptedScorer(tokenizer.size, tokenizer.encode("hi there big world"))
    assert constrained_beam_search(grammar, scorer, k=3).texts[0] == "hi there big world"
    assert best_first_search(grammar, scorer, k=1).texts == ["hi there big world"]


def test_uniform_ties_break_by_text(greeting_grammar):
    """Equal scores are ordered by text."""
    tokenizer = Tokenizer.word_level(greeting_grammar.sigma)
    grammar = compile_tokens(greeting_grammar, tokenizer)
    result = best_first_search(grammar, UniformScorer(tokenizer.size), k=6, renormalize=False)
    by_length: dict[int, list[str]] = {}
    for text in result.texts:
        by_length.setdefault(len(text.split()), []).append(text)
    assert all(texts == sorted(texts) for texts in by_length.values())
    assert result.texts[:2] == ["hello friend", "hello world"]


def test_no_completion_within_budget(setup):
    """Every greeting needs two tokens."""
    grammar, scorer, _ = setup
    with pytest.raises(NoCompletion):
        constrained_beam_search(grammar, scorer, max_len=1)
    with pytest.raises(NoCompletion):
        best_first_search(grammar, scorer, max_len=1)


def test_empty_language(make_grammar):
    """Searching an empty language fails before scoring."""
    grammar = compile_tokens(make_grammar("S", {"S": [["a", "S"]]}), Tokenizer.word_level(["a"]))
    with pytest.raises(EmptyLanguage):
        constrained_beam_search(grammar, UniformScorer(1))


def test_score_tokens_rejects_ungrammatical(setup):
    """Scoring a sequence outside the language is an error."""
    grammar, scorer, _ = setup
    with pytest.raises(IllegalToken):
        score_tokens(grammar, scorer, grammar.tokenizer.encode("world hello"))
    with pytest.raises(IllegalToken):
        score_tokens(grammar, scorer, grammar.tokenizer.encode("hello"))


def test_unconstrained_search_follows_scorer():
    """Without a grammar the scripted sentence wins."""
    tokenizer = Tokenizer.word_level(["a", "b", "c"])
    scorer = ScriptedScorer(tokenizer.size, [0, 1])
    result = unconstrained_beam_search(scorer, tokenizer, k=3, max_len=6)
    assert result.texts[0] == "a b"
    assert result.mode == Mode.UNCONSTRAINED
    assert len(result.candidates) == 3
    assert len(set(result.texts)) == 3


def test_unconstrained_respects_max_len():
    """Hypotheses stop at the token budget."""
    tokenizer = Tokenizer.word_level(["a", "b"])
    scorer = ScriptedScorer(tokenizer.size, [0, 1, 0, 1, 0, 1])
    result = unconstrained_beam_search(scorer, tokenizer, k=2, max_len=3)
    assert all(len(text.split()) <= 3 for text in result.texts)
    assert result.texts[0] == "a b a"


def test_length_normalization():
    """Normalized scores divide by the token count raised to the exponent."""
    hyp = Hypothesis((1, 2, 3, 4), -8.0)
    assert hyp.score() == -8.0
    assert hyp.score(1.0) == -2.0
    assert hyp.score(0.5) == -4.0
    assert Hypothesis((), -1.0).score(1.0) == -1.0
