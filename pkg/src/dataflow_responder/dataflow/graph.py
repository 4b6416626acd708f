"""Dataflow graphs: nodes, validation, execution and extension."""

import logging
import re
from collections.abc import Sequence
from datetime import datetime
from graphlib import CycleError, TopologicalSorter
from typing import Any, Self

from pydantic import BaseModel, Field, model_validator

from dataflow_responder.dataflow.registry import ExecutionContext, FunctionRegistry
from dataflow_responder.dataflow.values import LITERAL_KINDS, render_json, value_tag
from dataflow_responder.errors import ExecutionError, GraphTypeError, ResponderError

logger = logging.getLogger(__name__)

_NUMBERED_ID = re.compile(r"v(\d+)")


class Node(BaseModel):
    """A function application or literal in a dataflow graph."""

    id: str = Field(description="Stable node id, unique within the graph")
    op: str = Field(description="Function name or literal kind")
    args: list[str] = Field(default_factory=list, description="Argument node ids")
    arg_names: list[str | None] = Field(
        default_factory=list, description="Parameter names aligned with args"
    )
    value: Any = Field(default=None, description="Value once evaluated")
    evaluated: bool = Field(default=False, description="Whether value is set")

    @property
    def is_literal(self) -> bool:
        """Whether this node is a literal constant."""
        return self.op in LITERAL_KINDS and not self.args

    def names(self) -> list[str | None]:
        """Parameter names padded to the argument count."""
        return list(self.arg_names) + [None] * (len(self.args) - len(self.arg_names))


class DataflowGraph(BaseModel):
    """A computation DAG rooted at ``root``.

    ``now`` is set once the graph has been executed; it is the timestamp that
    date-relative functions were evaluated against.
    """

    nodes: dict[str, Node] = Field(description="Nodes by id, in insertion order")
    root: str = Field(description="Root node id")
    now: datetime | None = Field(default=None, description="Execution timestamp")

    @model_validator(mode="after")
    def _check_structure(self) -> Self:
        if self.root not in self.nodes:
            raise ValueError(f"root {self.root} not in graph")
        for node in self.nodes.values():
            missing = [arg for arg in node.args if arg not in self.nodes]
            if missing:
                raise ValueError(f"node {node.id} refers to missing nodes {missing}")
            if node.is_literal and not node.evaluated:
                raise ValueError(f"literal node {node.id} has no value")
        self.topological_order()
        return self

    @property
    def executed(self) -> bool:
        """Whether :func:`execute` has run on this graph."""
        return self.now is not None

    def node(self, node_id: str) -> Node:
        """Return a node by id."""
        return self.nodes[node_id]

    def value(self, node_id: str) -> Any:
        """Return the value of an evaluated node.

        Raises:
            ExecutionError: If the node has not been evaluated.
        """
        node = self.nodes[node_id]
        if not node.evaluated:
            raise ExecutionError("node has not been evaluated", node_id)
        return node.value

    def topological_order(self, start: str | None = None) -> list[str]:
        """Return node ids with arguments before their consumers.

        Args:
            start: Restrict to nodes reachable from this id.

        Returns:
            Node ids in a deterministic topological order.

        Raises:
            ValueError: If the graph has a cycle.
        """
        ids = self.reachable(start) if start is not None else list(self.nodes)
        sorter: TopologicalSorter[str] = TopologicalSorter()
        for node_id in ids:
            sorter.add(node_id, *self.nodes[node_id].args)
        try:
            return list(sorter.static_order())
        except CycleError as exc:
            raise ValueError(f"graph has a cycle through {exc.args[1]}") from exc

    def reachable(self, start: str | None = None) -> list[str]:
        """Return ids reachable from ``start`` (default: root) in pre-order."""
        seen: dict[str, None] = {}
        stack = [start or self.root]
        while stack:
            node_id = stack.pop()
            if node_id in seen:
                continue
            seen[node_id] = None
            stack.extend(reversed(self.nodes[node_id].args))
        return list(seen)

    def fresh_id(self) -> str:
        """Return the next unused ``v<n>`` id."""
        numbers = [int(m.group(1)) for i in self.nodes if (m := _NUMBERED_ID.fullmatch(i))]
        candidate = max(numbers, default=-1) + 1
        while f"v{candidate}" in self.nodes:
            candidate += 1
        return f"v{candidate}"

    def find_node(self, op: str, args: Sequence[str]) -> str | None:
        """Return the id of an existing node with this op and positional args."""
        for node in self.nodes.values():
            if node.op == op and node.args == list(args) and not any(node.arg_names):
                return node.id
        return None

    def find_literal(self, value: Any) -> str | None:
        """Return the id of an existing literal node holding exactly ``value``."""
        for node in self.nodes.values():
            if not node.is_literal:
                continue
            if value_tag(node.value) == value_tag(value) and node.value == value:
                return node.id
        return None

    def checkpoint(self) -> int:
        """Mark the current node count for :meth:`rollback`."""
        return len(self.nodes)

    def rollback(self, mark: int) -> None:
        """Drop nodes added after ``mark``."""
        for node_id in list(self.nodes)[mark:]:
            del self.nodes[node_id]

    def add_node(
        self,
        op: str,
        args: Sequence[str],
        registry: FunctionRegistry,
        arg_names: Sequence[str | None] = (),
    ) -> str:
        """Append a function node; evaluate it at once if the graph is executed.

        Args:
            op: Function name.
            args: Existing argument node ids.
            registry: Registry resolving ``op``.
            arg_names: Optional parameter names aligned with ``args``.

        Returns:
            The fresh node id.

        Raises:
            UnknownFunctionError: If ``op`` is not registered.
            GraphTypeError: On arity mismatch.
            ExecutionError: If evaluation fails.
        """
        missing = [arg for arg in args if arg not in self.nodes]
        if missing:
            raise ExecutionError(f"{op}: unknown argument nodes {missing}")
        spec = registry.get(op)
        if not spec.accepts_arity(len(args)):
            raise GraphTypeError(f"{op}: wrong number of arguments ({len(args)})")
        node = Node(id=self.fresh_id(), op=op, args=list(args), arg_names=list(arg_names))
        self.nodes[node.id] = node
        if self.now is not None:
            try:
                _evaluate(self, node, registry, ExecutionContext(now=self.now))
            except ResponderError:
                del self.nodes[node.id]
                raise
        return node.id

    def add_literal(self, value: Any) -> str:
        """Append a literal node holding ``value``.

        Returns:
            The fresh node id.
        """
        tag = value_tag(value)
        if tag not in LITERAL_KINDS:
            raise GraphTypeError(f"cannot make a literal from {tag}")
        op = "Number" if tag == "Integer" else tag
        node = Node(id=self.fresh_id(), op=op, value=value, evaluated=True)
        self.nodes[node.id] = node
        return node.id

    def copy_graph(self) -> "DataflowGraph":
        """Return a deep copy that can be extended independently."""
        return self.model_copy(deep=True)

    def render_result_json(self) -> str:
        """Render the root value as canonical JSON.

        Raises:
            ExecutionError: If the graph has not been executed.
        """
        if not self.executed:
            raise ExecutionError("graph has not been executed", self.root)
        return render_json(self.value(self.root))


def _evaluate(
    graph: DataflowGraph, node: Node, registry: FunctionRegistry, ctx: ExecutionContext
) -> None:
    if node.is_literal:
        return
    values = [graph.value(arg) for arg in node.args]
    try:
        node.value = registry.call(node.op, ctx, values, node.names())
    except ExecutionError as exc:
        if exc.node_id is None:
            raise type(exc)(str(exc), node.id) from exc
        raise
    node.evaluated = True


def validate_graph(graph: DataflowGraph, registry: FunctionRegistry) -> None:
    """Check that every non-literal op resolves and accepts its argument count.

    Raises:
        UnknownFunctionError: If an op is not registered.
        GraphTypeError: On arity mismatch.
    """
    for node in graph.nodes.values():
        if node.is_literal:
            continue
        spec = registry.get(node.op)
        if not spec.accepts_arity(len(node.args)):
            raise GraphTypeError(f"{node.op}: wrong number of arguments", node.id)


def execute(graph: DataflowGraph, registry: FunctionRegistry, now: datetime) -> DataflowGraph:
    """Evaluate every node reachable from the root, in topological order.

    Args:
        graph: Graph to execute; it is not modified.
        registry: Domain functions.
        now: Timestamp for date-relative functions.

    Returns:
        An executed copy of the graph.

    Raises:
        UnknownFunctionError: If an op is not registered.
        ExecutionError: If a domain function fails (carries the node id).
    """
    validate_graph(graph, registry)
    result = graph.copy_graph()
    ctx = ExecutionContext(now=now)
    order = result.topological_order(result.root)
    for node_id in order:
        _evaluate(result, result.nodes[node_id], registry, ctx)
    result.now = now
    logger.debug("executed %d nodes from root %s", len(order), result.root)
    return result


def add_node(
    graph: DataflowGraph, op: str, args: Sequence[str], registry: FunctionRegistry
) -> str:
    """Functional alias of :meth:`DataflowGraph.add_node`."""
    return graph.add_node(op, args, registry)
