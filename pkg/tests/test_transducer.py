"""Tests for dataflow transduction and built-in lexicalization."""

from datetime import date, datetime, time
from importlib.resources import files

import pytest

from dataflow_responder.dataflow.graph import execute
from dataflow_responder.dataflow.sexpr import parse_graph
from dataflow_responder.errors import (
    CoverageError,
    DepthExceeded,
    ExecutionError,
    RuleApplicationError,
    RuleError,
)
from dataflow_responder.grammar.qcfg import Nonterminal
from dataflow_responder.transduction.lexicalize import lexicalize
from dataflow_responder.transduction.rules import parse_rule_file
from dataflow_responder.transduction.transducer import Transducer, apply_rule


def _bundled_text() -> str:
    return files("dataflow_responder.data").joinpath("calendar.rules").read_text("utf-8")


def test_worked_example_language(transducer, executed_meetings):
    """The meetings computation yields truthful alternatives only."""
    result = transducer.transduce(executed_meetings)
    language = result.grammar.enumerate(limit=1000)
    assert len(language) == 72
    assert "Yes , I found one event tomorrow . It 's Design Review at 10 AM ." in language
    assert "Yes , you do . You have 1 event on Tuesday . It 's 10 - 11 AM ." in language
    assert (
        "Yes , I found one event on March 15 . It 's Design Review with Alice and Bob ."
        in language
    )
    assert not any(text.startswith("No") for text in language)


def test_worked_example_expansion(transducer, executed_meetings):
    """Rules add size/first nodes and vary the date and event descriptions."""
    result = transducer.transduce(executed_meetings)
    assert result.added[:2] == ("v3", "v4")
    assert result.graph.node("v3").op == "size"
    assert result.graph.node("v4").op == "first"
    assert result.graph.find_node("size", ["v1"]) == "v3"
    assert sum(1 for n in result.graph.nodes.values() if n.op == "size") == 1
    assert len(result.grammar.productions_for(Nonterminal("PP", "v2"))) >= 2
    assert len(result.grammar.productions_for(Nonterminal("EVENT", "v4"))) >= 2
    assert result.grammar.start == Nonterminal("S", "v0")
    stats = result.grammar.stats()
    assert (stats.productions, stats.nonterminals) == (18, 11)
    assert list(executed_meetings.nodes) == ["v0", "v1", "v2"]


def test_date_realizations_of_v2(transducer, executed_meetings):
    """At least two distinct renderings of the date appear in the language."""
    language = transducer.transduce(executed_meetings).grammar.enumerate(limit=1000)
    renderings = {"tomorrow", "on March 15", "on Tuesday"}
    found = {r for r in renderings if any(f"event {r} ." in text for text in language)}
    assert found == renderings


def test_negative_answer(transducer, registry, now):
    """A free day only admits negative answers."""
    graph = execute(parse_graph('(nonEmpty (findEventsOnDate (Date "2022-03-16")))'), registry, now)
    language = transducer.transduce(graph).grammar.enumerate(limit=100)
    assert language
    assert all(text.startswith("No ,") for text in language)
    assert "No , your calendar is clear on Wednesday ." in language
    assert "No , you don't have any events on Wednesday ." in language
    assert not any(text[5:6].isupper() for text in language)


def test_transduce_is_deterministic(transducer, executed_meetings):
    """Transducing the same graph twice yields identical grammars."""
    first = transducer.transduce(executed_meetings).grammar.to_json()
    assert transducer.transduce(executed_meetings).grammar.to_json() == first


def test_requires_executed_graph(transducer, meetings_graph):
    """Transduction runs on executed graphs only."""
    with pytest.raises(ExecutionError):
        transducer.transduce(meetings_graph)


def test_missing_event_rules_raise_coverage_error(registry, executed_meetings):
    """Removing the EVENT rules leaves EVENT@v4 uncovered."""
    text = _bundled_text().split("# -- events")[0]
    transducer = Transducer(parse_rule_file(text), registry)
    with pytest.raises(CoverageError, match="EVENT@v4") as info:
        transducer.transduce(executed_meetings)
    assert info.value.uncovered == ["EVENT@v4"]


def test_runaway_rules_hit_depth_bound(registry, now):
    """Self-feeding rules stop at the depth bound."""
    rules = parse_rule_file('rule S on _ let y = identity(self) say "a {S <y>}"')
    graph = execute(parse_graph("(today)"), registry, now)
    with pytest.raises(DepthExceeded):
        Transducer(rules, registry, max_depth=5).transduce(graph)


def test_failing_rule_body(registry, now):
    """Errors inside rule bodies name the rule and node."""
    rules = parse_rule_file(
        'rule S[broken] on findEventsOnDate(d) let e = first(self) say "{S <e>}"'
    )
    graph = execute(parse_graph('(findEventsOnDate (Date "2022-03-16"))'), registry, now)
    with pytest.raises(RuleApplicationError) as info:
        Transducer(rules, registry).transduce(graph)
    assert info.value.rule_name == "broken"
    assert info.value.node_id == "v0"


def test_unregistered_rule_functions(registry):
    """Transducers check rule functions against their registry."""
    rules = parse_rule_file('rule S on f(x) let y = frobnicate(x) say "{S <y>}"')
    with pytest.raises(RuleError):
        Transducer(rules, registry)


def test_guard_failure_rolls_back(rules, registry, executed_meetings):
    """A rule whose guard fails adds no nodes."""
    graph = executed_meetings.copy_graph()
    found_many = next(r for r in rules.rules if r.name == "found_many")
    assert apply_rule(found_many, graph, "v1", registry) is None
    assert list(graph.nodes) == ["v0", "v1", "v2"]
    found_one = next(r for r in rules.rules if r.name == "found_one")
    production = apply_rule(found_one, graph, "v1", registry)
    assert production is not None
    assert str(production.lhs) == "S@v1"
    assert list(graph.nodes) == ["v0", "v1", "v2", "v3", "v4"]


def test_pattern_mismatch(rules, registry, executed_meetings):
    """Rules only fire on nodes their pattern matches."""
    graph = executed_meetings.copy_graph()
    count_one = next(r for r in rules.rules if r.name == "count_one")
    assert apply_rule(count_one, graph, "v0", registry) is None


def test_terminals(transducer):
    """Template words are exposed for tokenizer construction."""
    assert {"Yes", ",", "found", "events", "'s"} <= transducer.terminals


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        (True, [("yes",)]),
        (False, [("no",)]),
        (3, [("three",), ("3",)]),
        (15, [("15",)]),
        (2.5, [("2.5",)]),
        ("Design Review", [("Design", "Review")]),
        ("  ", []),
        (time(10, 30), [("10:30", "AM")]),
        (datetime(2022, 3, 15, 14), [("2", "PM")]),
        (["Alice"], [("Alice",)]),
        (["Alice", "Bob"], [("Alice", "and", "Bob")]),
        (["Alice", "Bob", "Carol"], [("Alice", ",", "Bob", "and", "Carol")]),
        ([], []),
    ],
)
def test_lexicalize(value, expected):
    """Primitive values render verbatim."""
    assert lexicalize(value) == expected


def test_lexicalize_relative_dates():
    """Dates near the execution date get relative names first."""
    now = datetime(2022, 3, 14, 9)
    assert lexicalize(date(2022, 3, 15), now) == [("tomorrow",), ("on", "March", "15")]
    assert lexicalize(date(2022, 3, 14), now) == [("today",), ("on", "March", "14")]
    assert lexicalize(date(2022, 3, 17), now) == [("on", "March", "17")]
    assert lexicalize(date(2022, 3, 17)) == [("on", "March", "17")]
