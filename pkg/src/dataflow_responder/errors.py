"""Exception hierarchy for dataflow-responder.

Every error carries an ``exit_code`` that the CLI maps to the process exit status.
"""

from collections.abc import Iterable


class ResponderError(Exception):
    """Base class for all engine errors."""

    exit_code: int = 1


class ConfigError(ResponderError):
    """Invalid run configuration or settings."""

    exit_code = 2


class GraphSyntaxError(ResponderError):
    """Malformed S-expression graph text."""

    exit_code = 3

    def __init__(self, message: str, position: int) -> None:
        """Initialize the error.

        Args:
            message: What went wrong.
            position: Character offset in the source text.
        """
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownFunctionError(ResponderError):
    """A function name is missing from the registry."""

    exit_code = 4


class ExecutionError(ResponderError):
    """A domain function failed while executing a node."""

    exit_code = 5

    def __init__(self, message: str, node_id: str | None = None) -> None:
        """Initialize the error.

        Args:
            message: What went wrong.
            node_id: Node whose evaluation failed, when known.
        """
        prefix = f"node {node_id}: " if node_id else ""
        super().__init__(f"{prefix}{message}")
        self.node_id = node_id


class GraphTypeError(ExecutionError):
    """An argument value does not match the function signature."""


class RuleSyntaxError(ResponderError):
    """Malformed rule file."""

    exit_code = 6

    def __init__(self, message: str, line: int) -> None:
        """Initialize the error.

        Args:
            message: What went wrong.
            line: 1-based line number in the rule file.
        """
        super().__init__(f"line {line}: {message}")
        self.line = line


class RuleError(ResponderError):
    """A rule is statically invalid (unbound variable, unknown type, empty template)."""

    exit_code = 6


class RuleApplicationError(ResponderError):
    """A rule body failed at transduction time."""

    exit_code = 7

    def __init__(self, rule_name: str, node_id: str, cause: Exception) -> None:
        """Initialize the error.

        Args:
            rule_name: Name of the failing rule.
            node_id: Node the rule was applied to.
            cause: Underlying error.
        """
        super().__init__(f"rule {rule_name} on {node_id}: {cause}")
        self.rule_name = rule_name
        self.node_id = node_id


class CoverageError(ResponderError):
    """Reachable grammar nonterminals have no applicable rule."""

    exit_code = 8

    def __init__(self, uncovered: Iterable[str]) -> None:
        """Initialize the error.

        Args:
            uncovered: Nonterminals rendered as ``TYPE@node``.
        """
        self.uncovered = sorted(uncovered)
        super().__init__("no rule covers " + ", ".join(self.uncovered))


class DepthExceeded(ResponderError):
    """Expansion or derivation passed the configured depth bound."""

    exit_code = 9


class GrammarError(ResponderError):
    """The grammar is structurally invalid."""

    exit_code = 10


class UnknownToken(ResponderError):
    """The tokenizer cannot cover a word."""

    exit_code = 11


class EmptyLanguage(ResponderError):
    """The grammar derives no finite string."""

    exit_code = 12


class IllegalToken(ResponderError):
    """A token outside the allowed set was advanced."""

    exit_code = 13


class NoCompletion(ResponderError):
    """No hypothesis finished within the length bound."""

    exit_code = 14


class OutOfVocabulary(ResponderError):
    """A context token id is outside the scorer vocabulary."""

    exit_code = 15


class RemoteLmError(ResponderError):
    """Transport failure or timeout talking to a remote scorer."""

    exit_code = 16


class ProtocolError(RemoteLmError):
    """The remote scorer answered outside the wire protocol."""


class VocabularyMismatch(ResponderError):
    """The remote vocabulary digest differs from the local tokenizer."""

    exit_code = 17


class DatasetError(ResponderError):
    """Dataset or predictions file is malformed or misaligned."""

    exit_code = 18


class ModelFormatError(ResponderError):
    """A saved language model file cannot be loaded."""

    exit_code = 19
