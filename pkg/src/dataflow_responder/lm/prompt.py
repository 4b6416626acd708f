"""Prompt rendering from a graph, its result and the user utterance."""

from functools import cache

from jinja2 import Environment, PackageLoader, StrictUndefined, Template
from pydantic import BaseModel, ConfigDict, Field

from dataflow_responder.dataflow.graph import DataflowGraph
from dataflow_responder.dataflow.sexpr import serialize_graph
from dataflow_responder.errors import ConfigError, ExecutionError

SENTINEL = "\n###\n"
PART_NAMES = ("utterance", "computation", "result")


class PromptFlags(BaseModel):
    """Which parts a prompt includes; parts always appear in a fixed order."""

    model_config = ConfigDict(frozen=True)

    include_utterance: bool = Field(default=False, description="Prefix the user utterance")
    include_computation: bool = Field(default=True, description="Serialized graph")
    include_result: bool = Field(default=True, description="Root value as JSON")

    @classmethod
    def parse(cls, text: str) -> "PromptFlags":
        """Parse a comma-separated part list such as ``computation,result``.

        Raises:
            ConfigError: On unknown part names.
        """
        names = {name.strip() for name in text.split(",") if name.strip()}
        unknown = sorted(names - set(PART_NAMES))
        if unknown:
            raise ConfigError(f"unknown prompt part(s): {', '.join(unknown)}")
        return cls(
            include_utterance="utterance" in names,
            include_computation="computation" in names,
            include_result="result" in names,
        )

    def names(self) -> list[str]:
        """Enabled part names in rendering order."""
        enabled = (self.include_utterance, self.include_computation, self.include_result)
        return [name for name, on in zip(PART_NAMES, enabled, strict=True) if on]


class Prompt(BaseModel):
    """A rendered prompt and the flags it was rendered with."""

    model_config = ConfigDict(frozen=True)

    flags: PromptFlags
    text: str


@cache
def _template() -> Template:
    env = Environment(
        loader=PackageLoader("dataflow_responder", "templates"),
        undefined=StrictUndefined,
        autoescape=False,
        keep_trailing_newline=False,
    )
    return env.get_template("prompt.txt.j2")


def build_prompt(
    graph: DataflowGraph, flags: PromptFlags, utterance: str | None = None
) -> Prompt:
    """Render the enabled parts joined by the sentinel line.

    Args:
        graph: Computation; must be executed when the result is included.
        flags: Parts to include.
        utterance: User turn, required when ``flags.include_utterance``.

    Returns:
        The prompt.

    Raises:
        ExecutionError: If the result is requested from an unexecuted graph.
        ConfigError: If the utterance is requested but missing.
    """
    parts: list[str] = []
    if flags.include_utterance:
        if utterance is None:
            raise ConfigError("prompt includes the utterance but none was given")
        parts.append(" ".join(utterance.split()))
    if flags.include_computation:
        parts.append(serialize_graph(graph))
    if flags.include_result:
        if not graph.executed:
            raise ExecutionError("prompt includes the result of an unexecuted graph", graph.root)
        parts.append(graph.render_result_json())
    return Prompt(flags=flags, text=_template().render(parts=parts, sentinel=SENTINEL))
