"""Client for language models served over HTTP.

The service exposes ``GET /vocab`` returning ``{"digest", "size"}`` and
``POST /score`` taking ``{"context", "mask", "renormalize"}`` and returning
``{"logprobs", "eos_logprob"}``. Log-probabilities of ``-inf`` travel as
``null``. Requests carry the full context; the server keeps no state.
"""

import logging
from collections.abc import Iterable, Sequence

import httpx
import numpy as np
from pydantic import BaseModel, Field, ValidationError

from dataflow_responder.errors import ProtocolError, RemoteLmError, VocabularyMismatch
from dataflow_responder.lm.scorers import LmScorer, LogProbs
from dataflow_responder.lm.tokenizer import Tokenizer

logger = logging.getLogger(__name__)


class VocabInfo(BaseModel):
    """Handshake payload identifying a vocabulary."""

    digest: str = Field(description="SHA-256 of id<TAB>piece lines")
    size: int = Field(ge=1, description="Number of tokens, EOS excluded")


class ScoreRequest(BaseModel):
    """Body of ``POST /score``."""

    context: list[int] = Field(description="Token ids so far")
    mask: list[int] | None = Field(default=None, description="Allowed ids, EOS id included")
    renormalize: bool = Field(default=True, description="Rescale allowed entries")


class ScoreResponse(BaseModel):
    """Reply of ``POST /score``; ``None`` stands for ``-inf``."""

    logprobs: list[float | None] = Field(description="One entry per vocabulary token")
    eos_logprob: float | None = Field(description="End-of-sequence entry")

    @classmethod
    def from_vector(cls, vector: LogProbs) -> "ScoreResponse":
        """Split a full vector into token and EOS entries."""
        values = [float(v) if np.isfinite(v) else None for v in vector]
        return cls(logprobs=values[:-1], eos_logprob=values[-1])

    def to_vector(self) -> LogProbs:
        """Join token and EOS entries into one vector."""
        values = [*self.logprobs, self.eos_logprob]
        return np.array([-np.inf if v is None else v for v in values], dtype=np.float64)


class RemoteScorer(LmScorer):
    """Scorer that forwards every query to a scoring service."""

    def __init__(
        self,
        base_url: str,
        tokenizer: Tokenizer,
        *,
        timeout: float = 10.0,
        client: httpx.Client | None = None,
        prefix: Sequence[int] = (),
        info: VocabInfo | None = None,
    ) -> None:
        """Connect and check that the service uses the local vocabulary.

        Args:
            base_url: Service root, e.g. ``http://127.0.0.1:8765``.
            tokenizer: Local tokenizer the ids refer to.
            timeout: Per-request timeout in seconds.
            client: Preconfigured client (tests pass one with a mock transport).
            prefix: Prompt ids sent ahead of every context.
            info: Handshake result of an existing connection; skips the handshake.

        Raises:
            RemoteLmError: On transport failures.
            ProtocolError: On malformed handshake replies.
            VocabularyMismatch: If digest or size differ.
        """
        super().__init__(tokenizer.size)
        self.base_url = base_url.rstrip("/")
        self.tokenizer = tokenizer
        self.client = client or httpx.Client(base_url=self.base_url, timeout=timeout)
        self.prefix = tuple(prefix)
        self.info = info if info is not None else self._handshake()

    def _handshake(self) -> VocabInfo:
        info = self._request("GET", "/vocab", VocabInfo)
        if info.digest != self.tokenizer.digest or info.size != self.tokenizer.size:
            raise VocabularyMismatch(
                f"remote vocabulary {info.digest[:12]}/{info.size} differs from local "
                f"{self.tokenizer.digest[:12]}/{self.tokenizer.size}"
            )
        logger.info(
            "connected to %s (vocabulary %s, %d tokens)", self.base_url, info.digest[:12], info.size
        )
        return info

    def _request[M: BaseModel](
        self, method: str, path: str, model: type[M], body: BaseModel | None = None
    ) -> M:
        content = body.model_dump_json().encode("utf-8") if body is not None else None
        headers = {"content-type": "application/json"} if content is not None else None
        try:
            response = self.client.request(method, path, content=content, headers=headers)
        except httpx.TimeoutException as exc:
            raise RemoteLmError(f"{method} {path} timed out") from exc
        except httpx.HTTPError as exc:
            raise RemoteLmError(f"{method} {path} failed: {exc}") from exc
        if response.status_code != 200:
            raise RemoteLmError(f"{method} {path} returned HTTP {response.status_code}")
        try:
            return model.model_validate_json(response.content)
        except ValidationError as exc:
            raise ProtocolError(f"{method} {path}: malformed reply: {exc}") from exc

    def score(
        self, context: Sequence[int], mask: Iterable[int] | None, renormalize: bool
    ) -> LogProbs:
        """Send one scoring request; the context is prefixed with the prompt ids."""
        request = ScoreRequest(
            context=[*self.prefix, *context],
            mask=sorted(set(mask)) if mask is not None else None,
            renormalize=renormalize,
        )
        reply = self._request("POST", "/score", ScoreResponse, request)
        if len(reply.logprobs) != self.vocab_size:
            raise ProtocolError(
                f"expected {self.vocab_size} logprobs, got {len(reply.logprobs)}"
            )
        return reply.to_vector()

    def _logprobs(self, context: tuple[int, ...]) -> LogProbs:
        return self.score(context, None, True)

    def next_logprobs(
        self,
        context: Sequence[int],
        mask: Iterable[int] | None = None,
        *,
        renormalize: bool = True,
    ) -> LogProbs:
        """Masking and renormalization happen on the server."""
        return self.score(self.check_context(context), mask, renormalize)

    def prompted(self, prompt: str) -> "RemoteScorer":
        """Same connection, with the prompt's in-vocabulary words sent as a prefix."""
        ids = self.tokenizer.known_ids(prompt)
        if not ids:
            return self
        return RemoteScorer(
            self.base_url, self.tokenizer, client=self.client, prefix=ids, info=self.info
        )

    def close(self) -> None:
        """Close the underlying HTTP client."""
        self.client.close()
