"""Tokenizer, next-token scorers and prompt construction."""

from dataflow_responder.lm.ngram import NgramModel, NgramScorer, TriggerTable, train_ngram
from dataflow_responder.lm.prompt import Prompt, PromptFlags, build_prompt
from dataflow_responder.lm.scorers import LmScorer, ScriptedScorer, UniformScorer, apply_mask
from dataflow_responder.lm.tokenizer import Tokenizer

__all__ = [
    "LmScorer",
    "NgramModel",
    "NgramScorer",
    "Prompt",
    "PromptFlags",
    "ScriptedScorer",
    "Tokenizer",
    "TriggerTable",
    "UniformScorer",
    "apply_mask",
    "build_prompt",
    "train_ngram",
]
