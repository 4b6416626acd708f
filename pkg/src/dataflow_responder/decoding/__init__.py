"""Constrained and unconstrained decoding plus the generation pipeline."""

from dataflow_responder.decoding.beam import (
    Hypothesis,
    best_first_search,
    constrained_beam_search,
    score_tokens,
    unconstrained_beam_search,
)
from dataflow_responder.decoding.pipeline import Prepared, generate, prepare, rule_tokenizer

__all__ = [
    "Hypothesis",
    "Prepared",
    "best_first_search",
    "constrained_beam_search",
    "generate",
    "prepare",
    "rule_tokenizer",
    "score_tokens",
    "unconstrained_beam_search",
]
