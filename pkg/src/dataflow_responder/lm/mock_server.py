"""FastAPI app serving any local scorer over the remote scoring protocol."""

import logging

from fastapi import FastAPI, HTTPException

from dataflow_responder import __version__
from dataflow_responder.errors import OutOfVocabulary
from dataflow_responder.lm.remote import ScoreRequest, ScoreResponse, VocabInfo
from dataflow_responder.lm.scorers import LmScorer
from dataflow_responder.lm.tokenizer import Tokenizer

logger = logging.getLogger(__name__)


def create_mock_app(tokenizer: Tokenizer, scorer: LmScorer) -> FastAPI:
    """Build the service app.

    Args:
        tokenizer: Vocabulary advertised by ``GET /vocab``.
        scorer: Local scorer answering ``POST /score``.

    Returns:
        The FastAPI application.
    """
    if scorer.vocab_size != tokenizer.size:
        raise ValueError("scorer and tokenizer vocabulary sizes differ")
    app = FastAPI(title="dataflow-responder mock LM", version=__version__)
    info = VocabInfo(digest=tokenizer.digest, size=tokenizer.size)

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/vocab", response_model=VocabInfo)
    def vocab() -> VocabInfo:
        return info

    @app.post("/score", response_model=ScoreResponse)
    def score(request: ScoreRequest) -> ScoreResponse:
        if request.mask is not None and any(not 0 <= i <= scorer.eos_id for i in request.mask):
            raise HTTPException(status_code=422, detail="mask id outside vocabulary")
        try:
            vector = scorer.next_logprobs(
                request.context, request.mask, renormalize=request.renormalize
            )
        except OutOfVocabulary as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        logger.debug("scored context of %d tokens", len(request.context))
        return ScoreResponse.from_vector(vector)

    return app
