"""Add-k smoothed n-gram language models with optional prompt triggers.

Conditionals are ``(c(h, w) + k) / (c(h) + k * (V + 1))`` over the ``V``
vocabulary tokens plus EOS, with histories left-padded by a begin marker.

A :class:`TriggerTable` learns which response tokens become more likely when a
prompt feature (a word or digit run of the prompt) is present. A prompted
scorer adds, per token, the strongest positive and the strongest negative
clipped log-lift among the prompt's features to the n-gram log-probabilities
and renormalizes.
"""

import json
import logging
import math
import re
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field, ValidationError

from dataflow_responder.errors import ConfigError, DatasetError, ModelFormatError
from dataflow_responder.lm.scorers import LmScorer, LogProbs, log_normalize
from dataflow_responder.lm.tokenizer import Tokenizer

logger = logging.getLogger(__name__)

BOS = -1
MODEL_FORMAT = "dataflow-responder/ngram"
MODEL_VERSION = 1
_FEATURE = re.compile(r"[A-Za-z][A-Za-z']*|\d+")
_M_ESTIMATE = 2.0


def prompt_features(prompt: str) -> list[str]:
    """Distinct prompt features in first-seen order."""
    return list(dict.fromkeys(_FEATURE.findall(prompt)))


class TriggerTable:
    """Prompt-feature to response-token association counts."""

    def __init__(
        self,
        vocab_size: int,
        pairs: int,
        background: dict[int, int],
        features: dict[str, int],
        cooccur: dict[str, dict[int, int]],
        k: float = 0.1,
    ) -> None:
        """Initialize from raw counts.

        Args:
            vocab_size: Number of tokens, EOS excluded.
            pairs: Number of training pairs.
            background: Responses containing each token.
            features: Prompts containing each feature.
            cooccur: Pairs containing both a feature and a token.
            k: Smoothing for the background rate.
        """
        self.vocab_size = vocab_size
        self.pairs = pairs
        self.background = background
        self.features = features
        self.cooccur = cooccur
        self.k = k
        self._base = np.full(vocab_size + 1, 1.0)
        self._seen = np.zeros(vocab_size + 1, dtype=bool)
        for token, count in background.items():
            self._base[token] = (count + k) / (pairs + 2 * k)
            self._seen[token] = True
        self._lifts: dict[str, LogProbs] = {}

    @classmethod
    def fit(
        cls,
        pairs: Sequence[tuple[str, Sequence[int]]],
        vocab_size: int,
        k: float = 0.1,
    ) -> "TriggerTable":
        """Count features and tokens over (prompt, response ids) pairs."""
        background: Counter[int] = Counter()
        features: Counter[str] = Counter()
        cooccur: dict[str, Counter[int]] = defaultdict(Counter)
        for prompt, response in pairs:
            tokens = set(response)
            background.update(tokens)
            for feature in prompt_features(prompt):
                features[feature] += 1
                cooccur[feature].update(tokens)
        return cls(
            vocab_size,
            len(pairs),
            dict(background),
            dict(features),
            {f: dict(c) for f, c in cooccur.items()},
            k,
        )

    def lift(self, feature: str) -> LogProbs | None:
        """Unclipped log-lift vector for one feature, or None if it was never seen."""
        if feature not in self.features:
            return None
        cached = self._lifts.get(feature)
        if cached is not None:
            return cached
        co = np.zeros(self.vocab_size + 1)
        for token, count in self.cooccur.get(feature, {}).items():
            co[token] = count
        df = self.features[feature]
        assoc = (co + _M_ESTIMATE * self._base) / (df + _M_ESTIMATE)
        lift = np.where(self._seen, np.log(assoc / self._base), 0.0)
        self._lifts[feature] = lift
        return lift

    def boost(self, prompt: str, weight: float, clip: float) -> LogProbs:
        """Additive log-score adjustment for a prompt.

        Each token takes its strongest positive and strongest negative clipped
        lift over the prompt's known features; unknown features contribute nothing.
        """
        lifts = [
            np.clip(lift, -clip, clip)
            for lift in map(self.lift, prompt_features(prompt))
            if lift is not None
        ]
        if not lifts:
            return np.zeros(self.vocab_size + 1)
        stacked = np.vstack(lifts)
        total = np.maximum(stacked.max(axis=0), 0.0) + np.minimum(stacked.min(axis=0), 0.0)
        return np.clip(weight * total, -clip, clip)

    def to_dict(self) -> dict[str, object]:
        """JSON-compatible counts."""
        return {
            "pairs": self.pairs,
            "k": self.k,
            "background": {str(t): c for t, c in sorted(self.background.items())},
            "features": dict(sorted(self.features.items())),
            "cooccur": {
                f: {str(t): c for t, c in sorted(counts.items())}
                for f, counts in sorted(self.cooccur.items())
            },
        }


class NgramModel:
    """Counts of an order-``n`` model over a tokenizer's vocabulary."""

    def __init__(
        self,
        order: int,
        k: float,
        tokenizer: Tokenizer,
        counts: dict[tuple[int, ...], dict[int, int]],
        triggers: TriggerTable | None = None,
    ) -> None:
        """Initialize the model.

        Args:
            order: n-gram order (history length is ``order - 1``).
            k: Add-k smoothing constant.
            tokenizer: Vocabulary the ids refer to.
            counts: Next-token counts per padded history.
            triggers: Optional prompt trigger statistics.
        """
        self.order = order
        self.k = k
        self.tokenizer = tokenizer
        self.counts = counts
        self.triggers = triggers

    @property
    def vocab_size(self) -> int:
        """Number of tokens, EOS excluded."""
        return self.tokenizer.size

    def history(self, context: Sequence[int]) -> tuple[int, ...]:
        """Last ``order - 1`` ids, left-padded with the begin marker."""
        width = self.order - 1
        if width == 0:
            return ()
        tail = tuple(context[-width:])
        return (BOS,) * (width - len(tail)) + tail

    def probabilities(self, context: Sequence[int]) -> npt.NDArray[np.float64]:
        """Smoothed next-token distribution (EOS last)."""
        size = self.vocab_size + 1
        row = np.zeros(size)
        for token, count in self.counts.get(self.history(context), {}).items():
            row[token] = count
        return (row + self.k) / (row.sum() + self.k * size)

    def save(self, path: Path) -> None:
        """Write the model as versioned JSON."""
        data = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "order": self.order,
            "k": self.k,
            "pieces": list(self.tokenizer.pieces),
            "counts": [
                [list(history), [[t, c] for t, c in sorted(nexts.items())]]
                for history, nexts in sorted(self.counts.items())
            ],
            "triggers": self.triggers.to_dict() if self.triggers is not None else None,
        }
        path.write_text(json.dumps(data, ensure_ascii=False), encoding="utf-8")
        logger.info(
            "saved %d-gram model with %d histories to %s", self.order, len(self.counts), path
        )

    @classmethod
    def load(cls, path: Path) -> "NgramModel":
        """Read a model written by :meth:`save`.

        Raises:
            ModelFormatError: If the file is unreadable or of another format.
        """
        try:
            raw = _NgramFile.model_validate_json(path.read_bytes())
        except (OSError, ValidationError) as exc:
            raise ModelFormatError(f"cannot load n-gram model {path}: {exc}") from exc
        if raw.format != MODEL_FORMAT or raw.version != MODEL_VERSION:
            raise ModelFormatError(f"{path}: unsupported model format {raw.format} v{raw.version}")
        try:
            tokenizer = Tokenizer(raw.pieces)
        except ValueError as exc:
            raise ModelFormatError(f"{path}: {exc}") from exc
        counts = {tuple(h): {t: c for t, c in nexts} for h, nexts in raw.counts}
        triggers = None
        if raw.triggers is not None:
            t = raw.triggers
            triggers = TriggerTable(
                tokenizer.size,
                t.pairs,
                {int(tok): c for tok, c in t.background.items()},
                dict(t.features),
                {f: {int(tok): c for tok, c in cs.items()} for f, cs in t.cooccur.items()},
                t.k,
            )
        return cls(raw.order, raw.k, tokenizer, counts, triggers)


class _TriggerFile(BaseModel):
    pairs: int
    k: float
    background: dict[str, int]
    features: dict[str, int]
    cooccur: dict[str, dict[str, int]]


class _NgramFile(BaseModel):
    format: str
    version: int
    order: int = Field(ge=1)
    k: float = Field(gt=0)
    pieces: list[str]
    counts: list[tuple[list[int], list[tuple[int, int]]]]
    triggers: _TriggerFile | None = None


def train_ngram(
    corpus: Iterable[Sequence[int]],
    order: int,
    k: float,
    tokenizer: Tokenizer,
    prompts: Sequence[str] | None = None,
) -> NgramModel:
    """Count n-grams over token sequences (EOS appended to each).

    Args:
        corpus: Token-id sequences.
        order: n-gram order, at least 1.
        k: Add-k constant, positive.
        tokenizer: Vocabulary of the ids.
        prompts: Optional prompts aligned with ``corpus``; enables triggers.

    Returns:
        The trained model.

    Raises:
        ConfigError: On a bad order or smoothing constant.
        DatasetError: On an empty corpus or misaligned prompts.
    """
    if order < 1:
        raise ConfigError("n-gram order must be at least 1")
    if k <= 0:
        raise ConfigError("smoothing constant k must be positive")
    sequences = [list(seq) for seq in corpus]
    if not sequences:
        raise DatasetError("cannot train on an empty corpus")
    if prompts is not None and len(prompts) != len(sequences):
        raise DatasetError(f"{len(prompts)} prompts for {len(sequences)} sequences")

    model = NgramModel(order, k, tokenizer, {})
    raw: dict[tuple[int, ...], Counter[int]] = defaultdict(Counter)
    for seq in sequences:
        for token in seq:
            if not 0 <= token < tokenizer.size:
                raise DatasetError(f"token id {token} outside vocabulary")
        padded = [*seq, tokenizer.eos_id]
        for i, token in enumerate(padded):
            raw[model.history(padded[:i])][token] += 1
    model.counts = {h: dict(c) for h, c in raw.items()}
    if prompts is not None:
        pairs = list(zip(prompts, sequences, strict=True))
        model.triggers = TriggerTable.fit(pairs, tokenizer.size, k)
    logger.info(
        "trained %d-gram model on %d sequences (%d histories)", order, len(sequences), len(raw)
    )
    return model


def train_on_texts(
    responses: Sequence[str],
    order: int,
    k: float,
    prompts: Sequence[str] | None = None,
) -> NgramModel:
    """Build a word-level tokenizer (with character fallback) and train on texts."""
    tokenizer = Tokenizer.word_level(
        (word for text in responses for word in text.split()), char_fallback=True
    )
    corpus = [tokenizer.encode(text) for text in responses]
    return train_ngram(corpus, order, k, tokenizer, prompts)


class NgramScorer(LmScorer):
    """Scorer backed by an :class:`NgramModel`."""

    def __init__(
        self,
        model: NgramModel,
        trigger_weight: float = 1.0,
        trigger_clip: float = 3.0,
        boost: LogProbs | None = None,
    ) -> None:
        """Initialize the scorer.

        Args:
            model: Trained model.
            trigger_weight: Scale of the prompt boost.
            trigger_clip: Bound on per-feature and total log-lifts.
            boost: Precomputed prompt boost; set by :meth:`prompted`.
        """
        super().__init__(model.vocab_size)
        self.model = model
        self.trigger_weight = trigger_weight
        self.trigger_clip = trigger_clip
        self.boost = boost

    def _logprobs(self, context: tuple[int, ...]) -> LogProbs:
        logprobs = np.log(self.model.probabilities(context))
        if self.boost is None:
            return logprobs
        return log_normalize(logprobs + self.boost)

    def prompted(self, prompt: str) -> "NgramScorer":
        """Bind to a prompt; without trigger statistics this is the plain scorer."""
        if self.model.triggers is None or self.trigger_weight == 0:
            return self
        boost = self.model.triggers.boost(prompt, self.trigger_weight, self.trigger_clip)
        return NgramScorer(self.model, self.trigger_weight, self.trigger_clip, boost)


def perplexity(model: NgramModel, corpus: Iterable[Sequence[int]]) -> float:
    """Per-token perplexity (EOS included) of a corpus."""
    total = 0.0
    count = 0
    for seq in corpus:
        padded = [*seq, model.tokenizer.eos_id]
        for i, token in enumerate(padded):
            total -= math.log(model.probabilities(padded[:i])[token])
            count += 1
    return math.exp(total / count) if count else float("inf")
