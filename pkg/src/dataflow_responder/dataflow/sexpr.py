"""S-expression syntax for dataflow graphs.

Grammar::

    graph   := (label expr)* expr
    expr    := label? "(" name arg* ")" | "(" KIND literal ")" | ref
    arg     := (":" name)? expr
    label   := "#" id "="          ref := "#" id "#"
    literal := number | "string" | true | false | "YYYY-MM-DD" | "HH:MM" | "YYYY-MM-DDTHH:MM"

Unlabelled nodes receive ids ``v0, v1, ...`` in pre-order; labels give explicit
ids and let a node be shared (``#v1=(...)`` then ``#v1#``). Labelled expressions
before the last one define nodes the root does not reach.
"""

import json
import re
from dataclasses import dataclass
from datetime import date, datetime, time
from typing import Any

from pydantic import ValidationError

from dataflow_responder.dataflow.graph import DataflowGraph, Node, validate_graph
from dataflow_responder.dataflow.registry import FunctionRegistry
from dataflow_responder.dataflow.values import LITERAL_KINDS
from dataflow_responder.errors import GraphSyntaxError

_TOKEN = re.compile(
    r"""
    (?P<space>\s+|;[^\n]*)
    |(?P<open>\()
    |(?P<close>\))
    |(?P<string>"(?:[^"\\]|\\.)*")
    |(?P<define>\#[A-Za-z_][\w.-]*=)
    |(?P<ref>\#[A-Za-z_][\w.-]*\#)
    |(?P<keyword>:[A-Za-z_][\w-]*)
    |(?P<atom>[^\s()";]+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.lastgroup is None:
            raise GraphSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if match.lastgroup != "space":
            tokens.append(_Token(match.lastgroup, match.group(), pos))
        pos = match.end()
    return tokens


def parse_literal(kind: str, text: str) -> Any:
    """Convert literal text of a given kind into a value.

    ``Number`` yields an integer when the text is integral, a float otherwise.

    Args:
        kind: Literal kind.
        text: Literal text without surrounding quotes.

    Returns:
        The value.

    Raises:
        ValueError: If the text does not fit the kind.
    """
    if kind in ("Number", "Integer"):
        if kind == "Integer" or re.fullmatch(r"[+-]?\d+", text):
            return int(text)
        return float(text)
    if kind == "Text":
        return text
    if kind == "Boolean":
        if text not in ("true", "false"):
            raise ValueError(f"not a boolean: {text}")
        return text == "true"
    if kind == "Date":
        return date.fromisoformat(text)
    if kind == "Time":
        return time.fromisoformat(text)
    if kind == "DateTime":
        return datetime.fromisoformat(text)
    raise ValueError(f"unknown literal kind {kind}")


def format_literal(node: Node) -> str:
    """Render a literal node back to S-expression text."""
    value = node.value
    if node.op == "Boolean":
        body = "true" if value else "false"
    elif node.op in ("Number", "Integer"):
        body = repr(value)
    elif node.op == "Text":
        body = json.dumps(value, ensure_ascii=False)
    else:
        body = json.dumps(value.isoformat())
    return f"({node.op} {body})"


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0
        self.nodes: dict[str, Node] = {}
        self.counter = 0
        self.labels = {t.text[1:-1] for t in self.tokens if t.kind == "define"}

    def peek(self) -> _Token | None:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def peek_kind(self) -> str | None:
        token = self.peek()
        return token.kind if token else None

    def take(self, kind: str) -> _Token:
        token = self.peek()
        if token is None:
            raise GraphSyntaxError(f"expected {kind}, got end of input", len(self.text))
        if token.kind != kind:
            raise GraphSyntaxError(f"expected {kind}, got {token.text!r}", token.pos)
        self.index += 1
        return token

    def next_default_id(self) -> str:
        while True:
            candidate = f"v{self.counter}"
            self.counter += 1
            if candidate not in self.labels:
                return candidate

    def parse(self) -> DataflowGraph:
        labelled = self.peek_kind() == "define"
        root = self.expr()
        while (token := self.peek()) is not None:
            if not labelled:
                raise GraphSyntaxError(f"trailing input {token.text!r}", token.pos)
            labelled = token.kind == "define"
            root = self.expr()
        try:
            return DataflowGraph(nodes=self.nodes, root=root)
        except ValidationError as exc:
            raise GraphSyntaxError(exc.errors()[0]["msg"], 0) from exc

    def expr(self) -> str:
        token = self.peek()
        if token is None:
            raise GraphSyntaxError("expected expression, got end of input", len(self.text))
        if token.kind == "ref":
            self.index += 1
            node_id = token.text[1:-1]
            if node_id not in self.nodes:
                raise GraphSyntaxError(f"reference to undefined node {node_id}", token.pos)
            return node_id
        label = None
        if token.kind == "define":
            self.index += 1
            label = token.text[1:-1]
            if label in self.nodes:
                raise GraphSyntaxError(f"node {label} defined twice", token.pos)
        self.take("open")
        head = self.take("atom")
        node_id = label or self.next_default_id()
        if head.text in LITERAL_KINDS:
            node = self.literal(node_id, head)
        else:
            # reserve the id before children so numbering stays pre-order
            self.nodes[node_id] = Node(id=node_id, op=head.text)
            args: list[str] = []
            names: list[str | None] = []
            while (token := self.peek()) is not None and token.kind != "close":
                name = None
                if token.kind == "keyword":
                    self.index += 1
                    name = token.text[1:]
                args.append(self.expr())
                names.append(name)
            node = Node(
                id=node_id,
                op=head.text,
                args=args,
                arg_names=names if any(names) else [],
            )
        self.take("close")
        self.nodes[node_id] = node
        return node_id

    def literal(self, node_id: str, head: _Token) -> Node:
        token = self.peek()
        if token is None or token.kind not in ("atom", "string"):
            pos = token.pos if token else len(self.text)
            raise GraphSyntaxError(f"{head.text} literal needs a value", pos)
        self.index += 1
        raw = json.loads(token.text) if token.kind == "string" else token.text
        if head.text == "Text" and token.kind != "string":
            raise GraphSyntaxError("Text literal must be double-quoted", token.pos)
        try:
            value = parse_literal(head.text, raw)
        except ValueError as exc:
            raise GraphSyntaxError(str(exc), token.pos) from exc
        return Node(id=node_id, op=head.text, value=value, evaluated=True)


def parse_graph(text: str, registry: FunctionRegistry | None = None) -> DataflowGraph:
    """Parse S-expression text into an unexecuted graph.

    Args:
        text: Graph source.
        registry: When given, every function name must resolve in it.

    Returns:
        The parsed graph.

    Raises:
        GraphSyntaxError: On malformed input (with character position).
        UnknownFunctionError: On unknown names when a registry is supplied.
    """
    graph = _Parser(text).parse()
    if registry is not None:
        validate_graph(graph, registry)
    return graph


def serialize_graph(graph: DataflowGraph) -> str:
    """Render every node of ``graph`` as S-expression text.

    Shared nodes, and every node when ids differ from the default pre-order
    numbering, are written with ``#id=`` labels so parsing restores them.
    Nodes the root does not reach come first as labelled definitions.
    """
    order = graph.reachable()
    reached = set(order)
    detached = [node_id for node_id in graph.nodes if node_id not in reached]
    uses: dict[str, int] = {}
    for node_id in graph.nodes:
        for arg in graph.nodes[node_id].args:
            uses[arg] = uses.get(arg, 0) + 1
    canonical = not detached and order == [f"v{i}" for i in range(len(order))]
    written: set[str] = set()

    def emit(node_id: str) -> str:
        if node_id in written:
            return f"#{node_id}#"
        written.add(node_id)
        node = graph.nodes[node_id]
        label = "" if canonical and uses.get(node_id, 0) <= 1 else f"#{node_id}="
        if node.is_literal:
            return label + format_literal(node)
        parts = [node.op]
        for arg, name in zip(node.args, node.names(), strict=True):
            parts.append(f":{name} {emit(arg)}" if name else emit(arg))
        return f"{label}({' '.join(parts)})"

    head = [emit(node_id) for node_id in detached if node_id not in written]
    return " ".join([*head, emit(graph.root)])
