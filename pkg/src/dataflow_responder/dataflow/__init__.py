"""Dataflow graphs, domain function registries and the calendar function pack."""

from dataflow_responder.dataflow.calendar import Calendar, CalendarEvent, calendar_registry
from dataflow_responder.dataflow.graph import DataflowGraph, Node, add_node, execute
from dataflow_responder.dataflow.registry import ExecutionContext, FunctionRegistry
from dataflow_responder.dataflow.sexpr import parse_graph, serialize_graph
from dataflow_responder.dataflow.values import Record, render_json, value_tag

__all__ = [
    "Calendar",
    "CalendarEvent",
    "DataflowGraph",
    "ExecutionContext",
    "FunctionRegistry",
    "Node",
    "Record",
    "add_node",
    "calendar_registry",
    "execute",
    "parse_graph",
    "render_json",
    "serialize_graph",
    "value_tag",
]
