"""Tests for the S-expression syntax, graph structure and execution."""

from datetime import date

import pytest
from pydantic import ValidationError

from dataflow_responder.dataflow.graph import DataflowGraph, Node, execute
from dataflow_responder.dataflow.sexpr import parse_graph, serialize_graph
from dataflow_responder.errors import (
    ExecutionError,
    GraphSyntaxError,
    GraphTypeError,
    UnknownFunctionError,
)


def test_parse_numbers_nodes_in_preorder(meetings_graph):
    """Unlabelled nodes get v0, v1, ... in pre-order."""
    assert meetings_graph.root == "v0"
    assert [(n.id, n.op, n.args) for n in meetings_graph.nodes.values()] == [
        ("v0", "nonEmpty", ["v1"]),
        ("v1", "findEventsOnDate", ["v2"]),
        ("v2", "tomorrow", []),
    ]
    assert not meetings_graph.executed


def test_parse_literals():
    """Literal kinds convert their text to values."""
    graph = parse_graph(
        '(f (Number 2) (Number 2.5) (Text "Design Review") (Boolean true) '
        '(Date "2022-03-15") (Time "10:30") (DateTime "2022-03-15T10:00"))'
    )
    values = [graph.node(arg).value for arg in graph.node("v0").args]
    assert values[0] == 2 and isinstance(values[0], int)
    assert values[1:4] == [2.5, "Design Review", True]
    assert values[4] == date(2022, 3, 15)
    assert values[5].isoformat() == "10:30:00"
    assert values[6].isoformat() == "2022-03-15T10:00:00"


def test_labels_share_nodes():
    """``#id=`` defines a node that ``#id#`` refers back to."""
    graph = parse_graph("(sameMeridiem #t=(eventStart (first (findEventsOnDate (today)))) #t#)")
    assert graph.node("v0").args == ["t", "t"]
    assert graph.node("t").op == "eventStart"
    assert len(graph.nodes) == 5


def test_keyword_arguments(registry, now):
    """``:name`` binds an argument by parameter name."""
    graph = parse_graph("(addDays :days (Number 2) :date (today))")
    assert graph.node("v0").arg_names == ["days", "date"]
    assert execute(graph, registry, now).value("v0") == date(2022, 3, 16)


def test_comments_are_ignored():
    """``;`` starts a comment running to the end of the line."""
    graph = parse_graph("; question\n(today) ; trailing\n")
    assert list(graph.nodes) == ["v0"]


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("(nonEmpty (findEventsOnDate (tomorrow))", "end of input"),
        ("(today) (today)", "trailing input"),
        ("(Text hello)", "double-quoted"),
        ("(f #x#)", "undefined node"),
        ('(f #a=(today) #a=(today))', "defined twice"),
        ("(Number abc)", "abc"),
        ("", "end of input"),
    ],
)
def test_syntax_errors(text, message):
    """Malformed text raises a syntax error naming the problem."""
    with pytest.raises(GraphSyntaxError, match=message):
        parse_graph(text)


def test_syntax_error_position():
    """Syntax errors carry the character offset."""
    with pytest.raises(GraphSyntaxError) as info:
        parse_graph("(f (Text oops))")
    assert info.value.position == 9


def test_unknown_function_with_registry(registry):
    """A registry makes unknown names fail at parse time."""
    with pytest.raises(UnknownFunctionError):
        parse_graph("(frobnicate (today))", registry)


@pytest.mark.parametrize(
    "text",
    [
        "(nonEmpty (findEventsOnDate (tomorrow)))",
        '(size (findEventsOnDate (Date "2022-03-18")))',
        '(createEvent (Text "Coffee") (addDays (today) (Number 2)) (Number 9) (Text "Bob"))',
    ],
)
def test_serialize_canonical_text(text):
    """Canonical graphs serialize back to their source text."""
    assert serialize_graph(parse_graph(text)) == text


def test_serialize_keeps_shared_nodes():
    """Shared nodes survive a serialize/parse cycle."""
    graph = parse_graph("(sameMeridiem #t=(eventStart (first (findEventsOnDate (today)))) #t#)")
    again = parse_graph(serialize_graph(graph))
    assert again.node(again.root).args == graph.node(graph.root).args
    assert {i: n.op for i, n in again.nodes.items()} == {i: n.op for i, n in graph.nodes.items()}


def _shape(graph):
    return {
        i: (n.op, n.args, n.names(), n.value if n.is_literal else None)
        for i, n in graph.nodes.items()
    }


def test_serialize_keeps_detached_nodes(transducer, executed_meetings):
    """Nodes rules add beside the root tree survive a serialize/parse cycle."""
    expanded = transducer.transduce(executed_meetings).graph
    assert set(expanded.nodes) - set(expanded.reachable())
    expanded.add_literal(2)
    expanded.add_literal(date(2022, 3, 20))
    expanded.add_literal("Coffee")
    text = serialize_graph(expanded)
    again = parse_graph(text)
    assert again.root == expanded.root
    assert _shape(again) == _shape(expanded)
    assert serialize_graph(again) == text


def test_labelled_definitions_before_root():
    """Leading labelled expressions define nodes outside the root tree."""
    graph = parse_graph('#n=(Number 1) #d=(Date "2022-03-16") (nonEmpty (findEventsOnDate #d#))')
    assert graph.node("n").value == 1
    assert graph.reachable() == ["v0", "v1", "d"]
    with pytest.raises(GraphSyntaxError, match="trailing input"):
        parse_graph("(today) #n=(Number 1) (today)")


def test_execute_returns_executed_copy(meetings_graph, registry, now):
    """Execution evaluates a copy and leaves the input untouched."""
    executed = execute(meetings_graph, registry, now)
    assert executed.executed and executed.now == now
    assert executed.value("v2") == date(2022, 3, 15)
    assert executed.value("v0") is True
    assert [e.get("id") for e in executed.value("v1")] == ["e3"]
    assert not meetings_graph.node("v0").evaluated
    assert executed.render_result_json() == "true"


def test_execution_error_names_node(registry, now):
    """Failing functions report the node they ran on."""
    graph = parse_graph('(first (findEventsOnDate (Date "2022-03-16")))')
    with pytest.raises(ExecutionError) as info:
        execute(graph, registry, now)
    assert info.value.node_id == "v0"


def test_type_error_on_bad_argument(registry, now):
    """Arguments of the wrong tag are type errors."""
    with pytest.raises(GraphTypeError):
        execute(parse_graph("(size (today))"), registry, now)
    with pytest.raises(GraphTypeError):
        execute(parse_graph("(size)"), registry, now)


def test_cycles_are_rejected():
    """Graphs must be acyclic."""
    nodes = {
        "a": Node(id="a", op="f", args=["b"]),
        "b": Node(id="b", op="g", args=["a"]),
    }
    with pytest.raises(ValidationError, match="cycle"):
        DataflowGraph(nodes=nodes, root="a")


def test_missing_root_is_rejected():
    """The root must name a node."""
    with pytest.raises(ValidationError):
        DataflowGraph(nodes={"a": Node(id="a", op="today")}, root="b")


def test_unevaluated_value_raises(meetings_graph):
    """Reading an unevaluated node is an execution error."""
    with pytest.raises(ExecutionError):
        meetings_graph.value("v0")


def test_topological_order(executed_meetings):
    """Arguments come before their consumers."""
    assert executed_meetings.topological_order() == ["v2", "v1", "v0"]


def test_add_node_evaluates_on_executed_graph(executed_meetings, registry):
    """Nodes added to an executed graph are evaluated at once."""
    graph = executed_meetings.copy_graph()
    node_id = graph.add_node("size", ["v1"], registry)
    assert node_id == "v3"
    assert graph.value(node_id) == 1
    assert graph.find_node("size", ["v1"]) == "v3"
    assert "v3" not in executed_meetings.nodes


def test_add_node_failure_leaves_graph_unchanged(registry, now):
    """A node whose evaluation fails is not kept."""
    graph = execute(parse_graph('(findEventsOnDate (Date "2022-03-16"))'), registry, now)
    with pytest.raises(ExecutionError):
        graph.add_node("first", ["v0"], registry)
    assert list(graph.nodes) == ["v0", "v1"]


def test_literals_checkpoint_and_rollback(executed_meetings):
    """Literal nodes can be found again and rolled back."""
    graph = executed_meetings.copy_graph()
    mark = graph.checkpoint()
    five = graph.add_literal(5)
    assert graph.node(five).op == "Number"
    assert graph.find_literal(5) == five
    assert graph.find_literal(True) is None
    graph.rollback(mark)
    assert five not in graph.nodes
    assert graph.fresh_id() == "v3"
