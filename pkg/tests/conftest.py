"""Shared fixtures for the dataflow-responder test suite."""

from datetime import datetime

import pytest

from dataflow_responder.dataflow.calendar import Calendar, calendar_registry
from dataflow_responder.dataflow.graph import DataflowGraph, execute
from dataflow_responder.dataflow.registry import FunctionRegistry
from dataflow_responder.dataflow.sexpr import parse_graph
from dataflow_responder.grammar.qcfg import Nonterminal, Production, Qcfg, Terminal
from dataflow_responder.transduction.rules import RuleSet
from dataflow_responder.transduction.transducer import Transducer, load_rules

MEETINGS_TOMORROW = "(nonEmpty (findEventsOnDate (tomorrow)))"


@pytest.fixture
def now() -> datetime:
    """Fixture date of the bundled calendar: Monday 2022-03-14, 9 AM."""
    return datetime(2022, 3, 14, 9, 0)


@pytest.fixture
def calendar() -> Calendar:
    """Fresh copy of the bundled calendar fixture."""
    return Calendar.load()


@pytest.fixture
def registry(calendar: Calendar) -> FunctionRegistry:
    """Calendar function pack bound to the fixture calendar."""
    return calendar_registry(calendar)


@pytest.fixture
def rules() -> RuleSet:
    """Bundled calendar rule pack."""
    return load_rules()


@pytest.fixture
def transducer(rules: RuleSet, registry: FunctionRegistry) -> Transducer:
    """Transducer over the bundled rules."""
    return Transducer(rules, registry)


@pytest.fixture
def meetings_graph() -> DataflowGraph:
    """The "Do I have any meetings tomorrow?" computation."""
    return parse_graph(MEETINGS_TOMORROW)


@pytest.fixture
def executed_meetings(
    meetings_graph: DataflowGraph, registry: FunctionRegistry, now: datetime
) -> DataflowGraph:
    """The meetings computation executed at the fixture date."""
    return execute(meetings_graph, registry, now)


@pytest.fixture
def graph_file(tmp_path):  # type: ignore[no-untyped-def]
    """The meetings computation written to a file."""
    path = tmp_path / "meetings.graph"
    path.write_text(MEETINGS_TOMORROW + "\n", encoding="utf-8")
    return path


def word_grammar(start: str, rules: dict[str, list[list[str]]]) -> Qcfg:
    """Build a small grammar; rhs items naming a key of ``rules`` are nonterminals."""

    def symbol(item: str) -> Nonterminal | Terminal:
        return Nonterminal(item, "n") if item in rules else Terminal(item)

    productions = tuple(
        Production(Nonterminal(lhs, "n"), tuple(symbol(item) for item in rhs))
        for lhs, alternatives in rules.items()
        for rhs in alternatives
    )
    return Qcfg(Nonterminal(start, "n"), productions)


@pytest.fixture
def greeting_grammar() -> Qcfg:
    """Finite grammar with six strings of two to four words."""
    return word_grammar(
        "S",
        {
            "S": [["hello", "N"], ["hi", "there", "N"]],
            "N": [["world"], ["big", "world"], ["friend"]],
        },
    )


@pytest.fixture
def make_grammar():  # type: ignore[no-untyped-def]
    """Factory for small single-node grammars."""
    return word_grammar
