"""Beam and best-first search over next-token scorers.

Scores are summed token log-probabilities divided by ``length ** length_norm``
(length in tokens, end-of-sequence excluded). Equal scores are ordered by the
detokenized text so that every search is deterministic.
"""

import heapq
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from dataflow_responder.errors import IllegalToken, NoCompletion
from dataflow_responder.grammar.earley import DecoderState
from dataflow_responder.grammar.tokens import TokenGrammar
from dataflow_responder.lm.scorers import LmScorer
from dataflow_responder.lm.tokenizer import Tokenizer
from dataflow_responder.models import Candidate, DecodeResult, Mode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hypothesis:
    """A partial or finished token sequence."""

    tokens: tuple[int, ...]
    logprob: float
    state: DecoderState | None = None
    finished: bool = False

    def score(self, length_norm: float = 0.0) -> float:
        """Length-normalized log-probability."""
        if length_norm == 0.0 or not self.tokens:
            return self.logprob
        return self.logprob / (len(self.tokens) ** length_norm)


@dataclass
class _Stats:
    steps: int = 0
    expanded: int = 0
    pruned: int = 0

    def as_dict(self) -> dict[str, int | float]:
        return {"steps": self.steps, "expanded": self.expanded, "pruned": self.pruned}


class _Texts:
    """Memoized detokenization for tie-breaking."""

    def __init__(self, tokenizer: Tokenizer) -> None:
        self.tokenizer = tokenizer
        self._cache: dict[tuple[int, ...], str] = {}

    def __call__(self, tokens: tuple[int, ...]) -> str:
        text = self._cache.get(tokens)
        if text is None:
            text = self.tokenizer.decode(tokens)
            self._cache[tokens] = text
        return text


def _finish(
    finished: list[Hypothesis], k: int, length_norm: float, text: _Texts, mode: Mode, stats: _Stats
) -> DecodeResult:
    best: dict[str, Candidate] = {}
    for hyp in sorted(finished, key=lambda h: (-h.score(length_norm), text(h.tokens))):
        key = text(hyp.tokens)
        best.setdefault(key, Candidate(text=key, score=hyp.score(length_norm)))
    candidates = list(best.values())[:k]
    logger.info(
        "%s search: %d steps, %d expanded, %d pruned, %d finished",
        mode.value,
        stats.steps,
        stats.expanded,
        stats.pruned,
        len(finished),
    )
    return DecodeResult(candidates=candidates, mode=mode, diagnostics=stats.as_dict())


def _allowed(hyp: Hypothesis, eos: int, max_len: int) -> list[int]:
    assert hyp.state is not None
    allowed = hyp.state.allowed_next()
    ids = sorted(allowed.tokens) if len(hyp.tokens) < max_len else []
    return [*ids, eos] if allowed.eos else ids


def constrained_beam_search(
    grammar: TokenGrammar,
    scorer: LmScorer,
    k: int = 5,
    max_len: int = 40,
    length_norm: float = 0.0,
    renormalize: bool = True,
) -> DecodeResult:
    """Step-synchronous beam search restricted to the grammar's language.

    Every step scores each live hypothesis on the tokens its Earley state
    allows (EOS only where the prefix is a sentence), keeps the global top-K
    extensions and sets finished ones aside.

    Args:
        grammar: Compiled token grammar.
        scorer: Next-token scorer, already bound to the prompt.
        k: Beam size and number of results.
        max_len: Token budget per response.
        length_norm: Length normalization exponent.
        renormalize: Renormalize scores over the allowed tokens.

    Returns:
        Up to ``k`` grammatical candidates, best first.

    Raises:
        EmptyLanguage: If the grammar derives nothing.
        NoCompletion: If no hypothesis finishes within ``max_len``.
    """
    text = _Texts(grammar.tokenizer)
    eos = grammar.eos_id
    stats = _Stats()
    live = [Hypothesis((), 0.0, DecoderState.initial(grammar))]
    finished: list[Hypothesis] = []
    while live:
        stats.steps += 1
        pool: list[tuple[Hypothesis, int, float]] = []
        for hyp in live:
            ids = _allowed(hyp, eos, max_len)
            if not ids:
                continue
            logprobs = scorer.next_logprobs(hyp.tokens, ids, renormalize=renormalize)
            for token in ids:
                if np.isfinite(logprobs[token]):
                    pool.append((hyp, token, hyp.logprob + float(logprobs[token])))

        def key(entry: tuple[Hypothesis, int, float]) -> tuple[float, str]:
            hyp, token, logprob = entry
            tokens = hyp.tokens if token == eos else (*hyp.tokens, token)
            return (-Hypothesis(tokens, logprob).score(length_norm), text(tokens))

        pool.sort(key=key)
        stats.pruned += max(0, len(pool) - k)
        live = []
        for hyp, token, logprob in pool[:k]:
            if token == eos:
                finished.append(Hypothesis(hyp.tokens, logprob, hyp.state, finished=True))
            else:
                assert hyp.state is not None
                live.append(Hypothesis((*hyp.tokens, token), logprob, hyp.state.advance(token)))
                stats.expanded += 1
        if length_norm == 0.0 and len(finished) >= k and live:
            floor = sorted(h.logprob for h in finished)[-k]
            if max(h.logprob for h in live) < floor:
                break
    if not finished:
        raise NoCompletion(f"no grammatical response within {max_len} tokens")
    return _finish(finished, k, length_norm, text, Mode.CONSTRAINED, stats)


def best_first_search(
    grammar: TokenGrammar,
    scorer: LmScorer,
    k: int = 5,
    max_len: int = 40,
    renormalize: bool = True,
    max_expansions: int = 200_000,
) -> DecodeResult:
    """Exact top-K under unnormalized scores by uniform-cost search.

    Scores only decrease as tokens are appended, so the first ``k`` finished
    hypotheses popped from the frontier are the ``k`` best strings.

    Raises:
        EmptyLanguage: If the grammar derives nothing.
        NoCompletion: If nothing finishes within ``max_len`` or the expansion budget.
    """
    text = _Texts(grammar.tokenizer)
    eos = grammar.eos_id
    stats = _Stats()
    start = Hypothesis((), 0.0, DecoderState.initial(grammar))
    counter = 0
    frontier: list[tuple[float, str, int, int, Hypothesis]] = [(0.0, "", 1, counter, start)]
    finished: list[Hypothesis] = []
    seen: set[str] = set()
    while frontier and len(finished) < k:
        _, _, _, _, hyp = heapq.heappop(frontier)
        if hyp.finished:
            if text(hyp.tokens) not in seen:
                seen.add(text(hyp.tokens))
                finished.append(hyp)
            continue
        if stats.expanded >= max_expansions:
            logger.warning("best-first search stopped after %d expansions", max_expansions)
            break
        stats.expanded += 1
        ids = _allowed(hyp, eos, max_len)
        if not ids:
            continue
        logprobs = scorer.next_logprobs(hyp.tokens, ids, renormalize=renormalize)
        for token in ids:
            if not np.isfinite(logprobs[token]):
                continue
            logprob = hyp.logprob + float(logprobs[token])
            if token == eos:
                child = Hypothesis(hyp.tokens, logprob, hyp.state, finished=True)
            else:
                assert hyp.state is not None
                child = Hypothesis((*hyp.tokens, token), logprob, hyp.state.advance(token))
            counter += 1
            entry = (-logprob, text(child.tokens), 0 if child.finished else 1, counter, child)
            heapq.heappush(frontier, entry)
    stats.steps = stats.expanded
    stats.pruned = len(frontier)
    if not finished:
        raise NoCompletion(f"no grammatical response within {max_len} tokens")
    return _finish(finished, k, 0.0, text, Mode.CONSTRAINED, stats)


def unconstrained_beam_search(
    scorer: LmScorer,
    tokenizer: Tokenizer,
    k: int = 5,
    max_len: int = 40,
    length_norm: float = 0.0,
) -> DecodeResult:
    """Plain beam search over the full vocabulary plus EOS.

    Hypotheses reaching ``max_len`` tokens are finished as they are.
    """
    text = _Texts(tokenizer)
    eos = tokenizer.eos_id
    stats = _Stats()
    live = [Hypothesis((), 0.0)]
    finished: list[Hypothesis] = []
    while live:
        stats.steps += 1
        pool: list[Hypothesis] = []
        for hyp in live:
            if len(hyp.tokens) >= max_len:
                finished.append(Hypothesis(hyp.tokens, hyp.logprob, finished=True))
                continue
            logprobs = scorer.next_logprobs(hyp.tokens)
            width = min(k, len(logprobs))
            top = np.argpartition(-logprobs, width - 1)[:width]
            for token in sorted(int(t) for t in top):
                if not np.isfinite(logprobs[token]):
                    continue
                logprob = hyp.logprob + float(logprobs[token])
                if token == eos:
                    pool.append(Hypothesis(hyp.tokens, logprob, finished=True))
                else:
                    pool.append(Hypothesis((*hyp.tokens, token), logprob))
        pool.sort(key=lambda h: (-h.score(length_norm), text(h.tokens), not h.finished))
        stats.pruned += max(0, len(pool) - k)
        live = []
        for hyp in pool[:k]:
            if hyp.finished:
                finished.append(hyp)
            else:
                live.append(hyp)
                stats.expanded += 1
        if length_norm == 0.0 and len(finished) >= k and live:
            floor = sorted(h.logprob for h in finished)[-k]
            if max(h.logprob for h in live) < floor:
                break
    return _finish(finished, k, length_norm, text, Mode.UNCONSTRAINED, stats)


def score_tokens(
    grammar: TokenGrammar | None,
    scorer: LmScorer,
    tokens: Sequence[int],
    renormalize: bool = True,
) -> float:
    """Log-probability a search assigns to a complete sequence (EOS included).

    With a grammar every step is masked to the tokens the grammar allows.

    Raises:
        IllegalToken: If the sequence is not in the grammar's language.
    """
    eos = scorer.eos_id
    state = DecoderState.initial(grammar) if grammar is not None else None
    total = 0.0
    for i, token in enumerate([*tokens, eos]):
        context = tokens[:i]
        if state is None:
            total += float(scorer.next_logprobs(context)[token])
            continue
        allowed = state.allowed_next()
        mask = [*sorted(allowed.tokens), *([eos] if allowed.eos else [])]
        if token not in mask:
            raise IllegalToken(f"token {token} not allowed at position {i}")
        total += float(scorer.next_logprobs(context, mask, renormalize=renormalize)[token])
        if token != eos:
            state = state.advance(token)
    return total

__all__ = [
    "Hypothesis",
    "best_first_search",
    "constrained_beam_search",
    "score_tokens",
    "unconstrained_beam_search",
]
