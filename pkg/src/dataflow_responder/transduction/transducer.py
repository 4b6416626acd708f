"""Dataflow transduction: rules applied to graph nodes yield QCFG productions.

Expansion starts from the start type at the graph root and proceeds breadth
first. Every (type, node) pair is expanded once; the productions it gets are
the built-in lexicalizations (``LEX`` only) followed by every matching rule in
file order.
"""

import logging
import operator
from collections import deque
from collections.abc import Callable
from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path
from typing import Any

from dataflow_responder.dataflow.graph import DataflowGraph
from dataflow_responder.dataflow.registry import ExecutionContext, FunctionRegistry
from dataflow_responder.dataflow.values import matches_tag
from dataflow_responder.errors import (
    ConfigError,
    CoverageError,
    DepthExceeded,
    ExecutionError,
    ResponderError,
    RuleApplicationError,
)
from dataflow_responder.grammar.qcfg import Nonterminal, Production, Qcfg, Symbol, Terminal
from dataflow_responder.transduction.lexicalize import lexicalize
from dataflow_responder.transduction.rules import (
    LEX,
    SELF,
    Call,
    CallPattern,
    Capture,
    Const,
    Expr,
    Guard,
    Pattern,
    RuleSet,
    Slot,
    TransductionRule,
    Var,
    Wildcard,
    parse_rule_file,
)

logger = logging.getLogger(__name__)

_COMPARISONS: dict[str, Callable[[Any, Any], bool]] = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}

Bindings = dict[str, str]


@dataclass(frozen=True)
class TransductionResult:
    """Expanded graph, its grammar and the ids of the nodes rules added."""

    graph: DataflowGraph
    grammar: Qcfg
    added: tuple[str, ...]


def _match(pattern: Pattern, graph: DataflowGraph, node_id: str, env: Bindings) -> bool:
    if isinstance(pattern, Wildcard):
        return True
    if isinstance(pattern, Capture):
        bound = env.get(pattern.name)
        if bound is not None and bound != node_id:
            return False
        if pattern.tag is not None:
            node = graph.node(node_id)
            if not node.evaluated or not matches_tag(node.value, pattern.tag):
                return False
        if pattern.inner is not None and not _match(pattern.inner, graph, node_id, env):
            return False
        env[pattern.name] = node_id
        return True
    node = graph.node(node_id)
    if node.op != pattern.op or node.is_literal:
        return False
    if len(node.args) < len(pattern.args):
        return False
    if len(node.args) > len(pattern.args) and not pattern.open_ended:
        return False
    return all(
        _match(sub, graph, arg, env) for sub, arg in zip(pattern.args, node.args, strict=False)
    )


class _RuleRun:
    """Clause evaluation for one rule on one node."""

    def __init__(
        self, graph: DataflowGraph, registry: FunctionRegistry, env: Bindings
    ) -> None:
        assert graph.now is not None
        self.graph = graph
        self.registry = registry
        self.env = env
        self.ctx = ExecutionContext(now=graph.now)

    def value(self, expr: Expr) -> Any:
        if isinstance(expr, Var):
            return self.graph.value(self.env[expr.name])
        if isinstance(expr, Const):
            return expr.value
        values = [self.value(arg) for arg in expr.args]
        return self.registry.call(expr.func, self.ctx, values)

    def holds(self, guard: Guard) -> bool:
        left = self.value(guard.left)
        if guard.op is None or guard.right is None:
            return bool(left)
        try:
            return bool(_COMPARISONS[guard.op](left, self.value(guard.right)))
        except TypeError as exc:
            raise ExecutionError(f"cannot compare with {guard.op}: {exc}") from exc

    def node(self, expr: Expr) -> str:
        if isinstance(expr, Var):
            return self.env[expr.name]
        if isinstance(expr, Const):
            found = self.graph.find_literal(expr.value)
            return found if found is not None else self.graph.add_literal(expr.value)
        assert isinstance(expr, Call)
        args = [self.node(arg) for arg in expr.args]
        found = self.graph.find_node(expr.func, args)
        if found is not None and self.graph.node(found).evaluated:
            return found
        return self.graph.add_node(expr.func, args, self.registry)


def apply_rule(
    rule: TransductionRule, graph: DataflowGraph, node: str, registry: FunctionRegistry
) -> Production | None:
    """Try one rule on one node of an executed graph.

    On success the let-bound nodes stay in ``graph`` and the instantiated
    production is returned; on a pattern or guard failure the graph is left as
    it was and None is returned.

    Raises:
        RuleApplicationError: If evaluating a clause fails.
    """
    env: Bindings = {}
    if not _match(rule.pattern, graph, node, env):
        return None
    env[SELF] = node
    mark = graph.checkpoint()
    run = _RuleRun(graph, registry, env)
    try:
        for clause in rule.clauses:
            if isinstance(clause, Guard):
                if not run.holds(clause):
                    graph.rollback(mark)
                    return None
            else:
                env[clause.var] = run.node(clause.expr)
    except ResponderError as exc:
        graph.rollback(mark)
        raise RuleApplicationError(rule.name, node, exc) from exc
    rhs: list[Symbol] = [
        Nonterminal(item.type, env[item.var]) if isinstance(item, Slot) else Terminal(item.word)
        for item in rule.template
    ]
    return Production(Nonterminal(rule.head, node), tuple(rhs))


class Transducer:
    """A rule set bound to the function registry its clauses call."""

    def __init__(self, ruleset: RuleSet, registry: FunctionRegistry, max_depth: int = 64) -> None:
        """Initialize the transducer.

        Args:
            ruleset: Parsed rules with declared types and start type.
            registry: Functions available to guards and lets.
            max_depth: Bound on expansion depth below the start symbol.

        Raises:
            RuleError: If a rule calls an unregistered function.
        """
        ruleset.check_functions(registry)
        self.ruleset = ruleset
        self.registry = registry
        self.max_depth = max_depth

    @classmethod
    def from_text(
        cls, text: str, registry: FunctionRegistry, max_depth: int = 64
    ) -> "Transducer":
        """Parse rule text and bind it to ``registry``."""
        return cls(parse_rule_file(text, registry), registry, max_depth)

    @classmethod
    def bundled(cls, registry: FunctionRegistry, max_depth: int = 64) -> "Transducer":
        """The calendar rule pack shipped with the package."""
        return cls(load_rules(), registry, max_depth)

    @property
    def nonterminals(self) -> frozenset[str]:
        """Declared nonterminal types."""
        return self.ruleset.nonterminals

    @property
    def start(self) -> str:
        """Start type."""
        return self.ruleset.start

    @property
    def terminals(self) -> frozenset[str]:
        """Words written literally in rule templates."""
        return self.ruleset.terminals

    def productions_for(self, graph: DataflowGraph, nonterminal: Nonterminal) -> list[Production]:
        """All productions for one (type, node) pair, extending ``graph`` as rules require."""
        out: list[Production] = []
        if nonterminal.type == LEX:
            node = graph.node(nonterminal.node)
            if node.evaluated:
                for words in lexicalize(node.value, graph.now):
                    out.append(Production(nonterminal, tuple(Terminal(w) for w in words)))
        for rule in self.ruleset.for_head(nonterminal.type):
            production = apply_rule(rule, graph, nonterminal.node, self.registry)
            if production is not None:
                logger.debug("rule %s fired on %s", rule.name, nonterminal.node)
                out.append(production)
        return list(dict.fromkeys(out))

    def transduce(self, graph: DataflowGraph) -> TransductionResult:
        """Expand an executed graph into a grammar.

        Args:
            graph: Executed input graph; it is not modified.

        Returns:
            The expanded graph, the grammar and the added node ids.

        Raises:
            ExecutionError: If the graph has not been executed.
            RuleApplicationError: If a rule body fails.
            DepthExceeded: If expansion passes ``max_depth``.
            CoverageError: If reachable nonterminals have no production.
        """
        if not graph.executed:
            raise ExecutionError("graph must be executed before transduction", graph.root)
        work = graph.copy_graph()
        start = Nonterminal(self.ruleset.start, work.root)
        queue: deque[tuple[Nonterminal, int]] = deque([(start, 0)])
        seen = {start}
        productions: list[Production] = []
        uncovered: list[str] = []
        while queue:
            nonterminal, depth = queue.popleft()
            if depth > self.max_depth:
                raise DepthExceeded(
                    f"expansion of {nonterminal} passed depth {self.max_depth}"
                )
            found = self.productions_for(work, nonterminal)
            if not found:
                uncovered.append(str(nonterminal))
                continue
            productions.extend(found)
            for production in found:
                for child in production.nonterminals():
                    if child not in seen:
                        seen.add(child)
                        queue.append((child, depth + 1))
        if uncovered:
            raise CoverageError(uncovered)

        grammar = Qcfg(start, tuple(productions))
        added = tuple(node_id for node_id in work.nodes if node_id not in graph.nodes)
        stats = grammar.stats()
        logger.info(
            "transduced %s: %d productions, %d nonterminals, %d added nodes",
            start,
            stats.productions,
            stats.nonterminals,
            len(added),
        )
        return TransductionResult(work, grammar, added)


def load_rules(path: Path | None = None) -> RuleSet:
    """Read a rule file, or the bundled calendar pack when ``path`` is None.

    Raises:
        ConfigError: If the file cannot be read.
        RuleSyntaxError: On malformed rules.
    """
    try:
        if path is None:
            text = files("dataflow_responder.data").joinpath("calendar.rules").read_text("utf-8")
        else:
            text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read rules {path}: {exc}") from exc
    return parse_rule_file(text)


def transduce(transducer: Transducer, graph: DataflowGraph) -> TransductionResult:
    """Functional alias of :meth:`Transducer.transduce`."""
    return transducer.transduce(graph)
