"""Word-level QCFGs, their token compilation and incremental Earley recognition."""

from dataflow_responder.grammar.earley import AllowedNext, DecoderState, advance, allowed_next, init
from dataflow_responder.grammar.qcfg import (
    Derivation,
    GrammarStats,
    Nonterminal,
    Production,
    Qcfg,
    Terminal,
)
from dataflow_responder.grammar.tokens import TokenGrammar, TokenProduction, compile_tokens

__all__ = [
    "AllowedNext",
    "DecoderState",
    "Derivation",
    "GrammarStats",
    "Nonterminal",
    "Production",
    "Qcfg",
    "Terminal",
    "TokenGrammar",
    "TokenProduction",
    "advance",
    "allowed_next",
    "compile_tokens",
    "init",
]
