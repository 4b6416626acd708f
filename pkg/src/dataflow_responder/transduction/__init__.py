"""Transduction rules and the transducer that turns graphs into grammars."""

from dataflow_responder.transduction.lexicalize import lexicalize
from dataflow_responder.transduction.rules import (
    LEX,
    RuleSet,
    TransductionRule,
    parse_rule_file,
    parse_rules,
)
from dataflow_responder.transduction.transducer import (
    TransductionResult,
    Transducer,
    apply_rule,
    load_rules,
    transduce,
)

__all__ = [
    "LEX",
    "RuleSet",
    "TransductionResult",
    "TransductionRule",
    "Transducer",
    "apply_rule",
    "lexicalize",
    "load_rules",
    "parse_rule_file",
    "parse_rules",
    "transduce",
]
