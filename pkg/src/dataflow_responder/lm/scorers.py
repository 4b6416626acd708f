"""Next-token scorers.

Every scorer returns a log-probability vector with ``vocab_size + 1`` entries;
the last one is end-of-sequence. Masking sets every entry outside the allowed
set to ``-inf`` and, unless disabled, renormalizes the rest.
"""

import math
from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence

import numpy as np
import numpy.typing as npt

from dataflow_responder.errors import OutOfVocabulary

LogProbs = npt.NDArray[np.float64]


def log_normalize(scores: LogProbs) -> LogProbs:
    """Shift log-scores so that their exponentials sum to one."""
    finite = np.isfinite(scores)
    if not finite.any():
        return scores
    return scores - np.logaddexp.reduce(scores[finite])


def apply_mask(logprobs: LogProbs, mask: Iterable[int], renormalize: bool = True) -> LogProbs:
    """Keep only ``mask`` entries of a log-probability vector.

    Args:
        logprobs: Full vector including the EOS entry.
        mask: Allowed ids (the EOS id included when it is allowed).
        renormalize: Rescale the kept entries to sum to one.

    Returns:
        A new vector with ``-inf`` outside the mask.
    """
    allowed = np.fromiter(sorted(set(mask)), dtype=np.int64)
    out = np.full_like(logprobs, -np.inf)
    if allowed.size:
        out[allowed] = logprobs[allowed]
    return log_normalize(out) if renormalize else out


class LmScorer(ABC):
    """Interface shared by local and remote language models.

    Scorers are read-only after construction and may be queried concurrently.
    """

    def __init__(self, vocab_size: int) -> None:
        """Initialize the scorer.

        Args:
            vocab_size: Number of tokens, EOS excluded.
        """
        if vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        self.vocab_size = vocab_size

    @property
    def eos_id(self) -> int:
        """Index of the end-of-sequence entry."""
        return self.vocab_size

    @abstractmethod
    def _logprobs(self, context: tuple[int, ...]) -> LogProbs:
        """Normalized log-probabilities for a validated context."""

    def check_context(self, context: Sequence[int]) -> tuple[int, ...]:
        """Validate context ids.

        Raises:
            OutOfVocabulary: If an id is outside ``[0, vocab_size)``.
        """
        for token in context:
            if not 0 <= token < self.vocab_size:
                raise OutOfVocabulary(f"context token {token} outside vocabulary")
        return tuple(context)

    def next_logprobs(
        self,
        context: Sequence[int],
        mask: Iterable[int] | None = None,
        *,
        renormalize: bool = True,
    ) -> LogProbs:
        """Log-probabilities of the next token.

        Args:
            context: Preceding token ids.
            mask: Allowed ids; None leaves the distribution unmasked.
            renormalize: Rescale the allowed entries to sum to one.

        Returns:
            Vector of ``vocab_size + 1`` log-probabilities.

        Raises:
            OutOfVocabulary: If the context holds an unknown id.
        """
        logprobs = self._logprobs(self.check_context(context))
        if mask is None:
            return logprobs
        return apply_mask(logprobs, mask, renormalize)

    def prompted(self, prompt: str) -> "LmScorer":
        """Scorer conditioned on ``prompt``; scorers that ignore prompts return themselves."""
        return self


class UniformScorer(LmScorer):
    """Equal probability for every token and EOS."""

    def _logprobs(self, context: tuple[int, ...]) -> LogProbs:
        return np.full(self.vocab_size + 1, -math.log(self.vocab_size + 1))


class ScriptedScorer(LmScorer):
    """Prefers the continuation of a fixed token script.

    The preferred token continues the longest script prefix that ends the
    context, or is EOS once the script is complete. It gets ``peak`` of the
    mass; the rest is spread evenly.
    """

    def __init__(self, vocab_size: int, script: Sequence[int], peak: float = 0.9) -> None:
        """Initialize the scorer.

        Args:
            vocab_size: Number of tokens, EOS excluded.
            script: Token ids to emit, EOS implied at the end.
            peak: Probability of the preferred token.
        """
        super().__init__(vocab_size)
        if not 0.0 < peak < 1.0:
            raise ValueError("peak must be in (0, 1)")
        self.script = tuple(self.check_context(script))
        self.peak = peak

    def preferred(self, context: tuple[int, ...]) -> int:
        """Token the script wants next."""
        for k in range(min(len(context), len(self.script)), -1, -1):
            if k == 0 or context[-k:] == self.script[:k]:
                return self.script[k] if k < len(self.script) else self.eos_id
        return self.eos_id

    def _logprobs(self, context: tuple[int, ...]) -> LogProbs:
        rest = (1.0 - self.peak) / self.vocab_size
        out = np.full(self.vocab_size + 1, math.log(rest))
        out[self.preferred(context)] = math.log(self.peak)
        return out
