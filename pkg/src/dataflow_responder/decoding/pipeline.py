"""End-to-end generation: execute, transduce, compile and decode."""

import logging
from dataclasses import dataclass

from dataflow_responder.dataflow.calendar import Calendar, calendar_registry
from dataflow_responder.dataflow.graph import DataflowGraph, execute
from dataflow_responder.decoding.beam import (
    best_first_search,
    constrained_beam_search,
    unconstrained_beam_search,
)
from dataflow_responder.grammar.qcfg import Qcfg
from dataflow_responder.grammar.tokens import compile_tokens
from dataflow_responder.lm.prompt import build_prompt
from dataflow_responder.lm.scorers import LmScorer
from dataflow_responder.lm.tokenizer import Tokenizer
from dataflow_responder.models import (
    Candidate,
    DecodeResult,
    GenerateOptions,
    Mode,
    SearchStrategy,
)
from dataflow_responder.transduction.rules import RuleSet
from dataflow_responder.transduction.transducer import Transducer, TransductionResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Prepared:
    """An executed graph with its transduction."""

    executed: DataflowGraph
    transduction: TransductionResult

    @property
    def grammar(self) -> Qcfg:
        return self.transduction.grammar


def rule_tokenizer(ruleset: RuleSet) -> Tokenizer:
    """Word-level tokenizer over the rule templates, spelling other words by character."""
    return Tokenizer.word_level(ruleset.terminals, char_fallback=True)


def prepare(
    graph: DataflowGraph,
    ruleset: RuleSet,
    options: GenerateOptions,
    calendar: Calendar | None = None,
) -> Prepared:
    """Execute ``graph`` against a private copy of the calendar and transduce it.

    Raises:
        UnknownFunctionError: If the graph calls an unregistered function.
        ExecutionError: If execution fails.
        CoverageError: If the rules leave a reachable nonterminal uncovered.
    """
    store = (calendar or Calendar.load()).copy()
    registry = calendar_registry(store)
    executed = execute(graph, registry, options.now)
    transducer = Transducer(ruleset, registry, options.max_depth)
    return Prepared(executed, transducer.transduce(executed))


def generate(
    graph: DataflowGraph,
    ruleset: RuleSet,
    scorer: LmScorer,
    tokenizer: Tokenizer,
    options: GenerateOptions,
    *,
    calendar: Calendar | None = None,
    utterance: str | None = None,
) -> DecodeResult:
    """Produce ranked responses for one computation.

    Args:
        graph: Unexecuted input graph.
        ruleset: Transduction rules; unused in unconstrained mode.
        scorer: Unprompted scorer over ``tokenizer``'s vocabulary.
        tokenizer: Tokenizer shared by grammar compilation and the scorer.
        options: Mode and search parameters.
        calendar: Calendar the graph runs against; the bundled fixture when omitted.
        utterance: User turn, used when the prompt includes it.

    Returns:
        Candidates best first. Constrained and sample results report the
        grammar size in their diagnostics.

    Raises:
        CoverageError: If the rules do not cover the graph.
        EmptyLanguage: If the grammar derives nothing.
        NoCompletion: If no grammatical response fits in ``max_len`` tokens.
    """
    if scorer.vocab_size != tokenizer.size:
        raise ValueError("scorer and tokenizer vocabulary sizes differ")

    if options.mode == Mode.UNCONSTRAINED:
        store = (calendar or Calendar.load()).copy()
        executed = execute(graph, calendar_registry(store), options.now)
        bound = scorer.prompted(build_prompt(executed, options.prompt, utterance).text)
        return unconstrained_beam_search(
            bound, tokenizer, options.beam_size, options.max_len, options.length_norm
        )

    prepared = prepare(graph, ruleset, options, calendar)
    size = prepared.grammar.stats().productions

    if options.mode == Mode.SAMPLE:
        assert options.seed is not None
        texts = prepared.grammar.samples(options.seed, options.beam_size, options.max_depth)
        logger.info("sampled %d responses with seed %d", len(texts), options.seed)
        return DecodeResult(
            candidates=[Candidate(text=t, score=0.0) for t in texts],
            mode=Mode.SAMPLE,
            diagnostics={"grammar_size": size},
        )

    grammar = compile_tokens(prepared.grammar, tokenizer)
    bound = scorer.prompted(build_prompt(prepared.executed, options.prompt, utterance).text)
    if options.strategy == SearchStrategy.BEST_FIRST:
        result = best_first_search(
            grammar, bound, options.beam_size, options.max_len, options.renormalize
        )
    else:
        result = constrained_beam_search(
            grammar,
            bound,
            options.beam_size,
            options.max_len,
            options.length_norm,
            options.renormalize,
        )
    return result.model_copy(update={"diagnostics": {**result.diagnostics, "grammar_size": size}})
