"""Rule DSL for dataflow transducers.

A rule file holds directives and rules::

    nonterminals S PP EVENT LEX
    start S

    # comments run to the end of the line
    rule S[found_one] on findEventsOnDate(date)
      let num = size(self)
      where num == 1
      let event = first(self)
      say "I found {LEX <num>} event {PP <date>} . {EVENT <event>} ."

Patterns are ``op(p, ...)`` (``...`` as the last argument accepts any further
arguments), captures ``var``, typed captures ``var:Tag``, named sub-patterns
``var@op(...)`` and the wildcard ``_``. The matched node is always bound to
``self``. ``where`` and ``let`` clauses run in file order; each may only use
variables bound before it.
"""

import json
import re
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import Any

from dataflow_responder.dataflow.registry import FunctionRegistry
from dataflow_responder.errors import RuleError, RuleSyntaxError

LEX = "LEX"
SELF = "self"

_TOKEN = re.compile(
    r"""
    (?P<newline>\n)
    |(?P<space>[ \t\r]+|\#[^\n]*)
    |(?P<string>"(?:[^"\\\n]|\\.)*")
    |(?P<number>-?\d+(?:\.\d+)?)
    |(?P<ellipsis>\.\.\.)
    |(?P<cmp>==|!=|<=|>=|<|>)
    |(?P<name>[A-Za-z_][A-Za-z0-9_]*)
    |(?P<punct>[(),;=:@\[\]])
    """,
    re.VERBOSE,
)
_SLOT = re.compile(r"\{\s*(?P<type>[A-Za-z_]\w*)\s*<\s*(?P<var>[A-Za-z_]\w*)\s*>\s*\}")
_TEMPLATE_PIECE = re.compile(r"\{[^}]*\}|[^\s{}]+|[{}]")
_KEYWORDS = {"rule", "on", "where", "and", "let", "say", "nonterminals", "start"}


# -- patterns ----------------------------------------------------------------


@dataclass(frozen=True)
class Wildcard:
    """Matches any node without binding it."""


@dataclass(frozen=True)
class CallPattern:
    """Matches a node by op name and argument sub-patterns."""

    op: str
    args: tuple["Pattern", ...] = ()
    open_ended: bool = False


@dataclass(frozen=True)
class Capture:
    """Binds the node to ``name``, optionally checking its value tag or shape."""

    name: str
    tag: str | None = None
    inner: CallPattern | None = None


Pattern = Wildcard | CallPattern | Capture


def pattern_variables(pattern: Pattern) -> Iterator[str]:
    """Variables bound by a pattern, outermost first."""
    if isinstance(pattern, Capture):
        yield pattern.name
        if pattern.inner is not None:
            yield from pattern_variables(pattern.inner)
    elif isinstance(pattern, CallPattern):
        for arg in pattern.args:
            yield from pattern_variables(arg)


# -- expressions and clauses -------------------------------------------------


@dataclass(frozen=True)
class Var:
    """Reference to a bound variable."""

    name: str


@dataclass(frozen=True)
class Const:
    """Literal constant."""

    value: Any


@dataclass(frozen=True)
class Call:
    """Registry function application."""

    func: str
    args: tuple["Expr", ...] = ()


Expr = Var | Const | Call


def expr_variables(expr: Expr) -> Iterator[str]:
    """Variables referenced by an expression."""
    if isinstance(expr, Var):
        yield expr.name
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from expr_variables(arg)


def expr_functions(expr: Expr) -> Iterator[str]:
    """Function names called by an expression."""
    if isinstance(expr, Call):
        yield expr.func
        for arg in expr.args:
            yield from expr_functions(arg)


@dataclass(frozen=True)
class Guard:
    """``left op right`` comparison, or a truthiness test when ``op`` is None."""

    left: Expr
    op: str | None = None
    right: Expr | None = None

    def expressions(self) -> list[Expr]:
        """Sub-expressions in evaluation order."""
        return [self.left] if self.right is None else [self.left, self.right]


@dataclass(frozen=True)
class Let:
    """``var = expr``: bind ``var`` to a (possibly new) graph node."""

    var: str
    expr: Expr


Clause = Guard | Let


# -- templates ---------------------------------------------------------------


@dataclass(frozen=True)
class Word:
    """Literal output word."""

    word: str


@dataclass(frozen=True)
class Slot:
    """``{TYPE <var>}`` nonterminal reference."""

    type: str
    var: str


TemplateItem = Word | Slot


@dataclass(frozen=True)
class TransductionRule:
    """Head type, pattern, ordered clauses and response template."""

    head: str
    name: str
    pattern: Pattern
    clauses: tuple[Clause, ...]
    template: tuple[TemplateItem, ...]
    line: int = 0

    @property
    def guards(self) -> list[Guard]:
        """Guard clauses in order."""
        return [c for c in self.clauses if isinstance(c, Guard)]

    @property
    def lets(self) -> list[Let]:
        """Let clauses in order."""
        return [c for c in self.clauses if isinstance(c, Let)]

    def slots(self) -> list[Slot]:
        """Nonterminal references of the template."""
        return [item for item in self.template if isinstance(item, Slot)]


@dataclass(frozen=True)
class RuleSet:
    """Rules plus the declared nonterminal types and start type."""

    rules: tuple[TransductionRule, ...]
    nonterminals: frozenset[str]
    start: str
    functions: frozenset[str] = field(default_factory=frozenset)

    def for_head(self, head: str) -> list[TransductionRule]:
        """Rules with the given head, in file order."""
        return [rule for rule in self.rules if rule.head == head]

    @property
    def terminals(self) -> frozenset[str]:
        """Words written literally in templates."""
        return frozenset(
            item.word for rule in self.rules for item in rule.template if isinstance(item, Word)
        )

    def check_functions(self, registry: FunctionRegistry) -> None:
        """Ensure every function used in a clause is registered.

        Raises:
            RuleError: Naming the first unknown function.
        """
        unknown = sorted(name for name in self.functions if name not in registry)
        if unknown:
            raise RuleError(f"unknown function(s) in rules: {', '.join(unknown)}")


# -- parser ------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line = 1
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.lastgroup is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line)
        kind = match.lastgroup
        if kind == "newline":
            line += 1
        elif kind != "space":
            tokens.append(_Token(kind, match.group(), line))
        pos = match.end()
    return tokens


class _RuleParser:
    def __init__(self, text: str) -> None:
        self.tokens = _tokenize(text)
        self.index = 0
        self.rules: list[TransductionRule] = []
        self.declared: set[str] | None = None
        self.start: str | None = None
        self.start_line = 0

    # token helpers

    def peek(self, offset: int = 0) -> _Token | None:
        i = self.index + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def line(self) -> int:
        token = self.peek()
        if token is not None:
            return token.line
        return self.tokens[-1].line if self.tokens else 1

    def at(self, text: str) -> bool:
        token = self.peek()
        return token is not None and token.text == text and token.kind != "string"

    def expect(self, text: str) -> _Token:
        token = self.peek()
        if token is None or token.text != text:
            found = "end of input" if token is None else repr(token.text)
            raise RuleSyntaxError(f"expected {text!r}, found {found}", self.line())
        self.index += 1
        return token

    def take(self, kind: str, what: str) -> _Token:
        token = self.peek()
        if token is None or token.kind != kind:
            found = "end of input" if token is None else repr(token.text)
            raise RuleSyntaxError(f"expected {what}, found {found}", self.line())
        self.index += 1
        return token

    def identifier(self, what: str) -> str:
        token = self.take("name", what)
        if token.text in _KEYWORDS:
            raise RuleSyntaxError(f"expected {what}, found keyword {token.text!r}", token.line)
        return token.text

    # grammar

    def parse(self) -> RuleSet:
        while (token := self.peek()) is not None:
            if token.text == "nonterminals":
                self.directive_nonterminals()
            elif token.text == "start":
                self.index += 1
                self.start_line = token.line
                self.start = self.identifier("start type")
            elif token.text == "rule":
                self.rules.append(self.rule())
            else:
                raise RuleSyntaxError(f"expected 'rule', found {token.text!r}", token.line)
        return self.finish()

    def directive_nonterminals(self) -> None:
        token = self.expect("nonterminals")
        names = self.declared if self.declared is not None else set()
        while (nxt := self.peek()) is not None and nxt.line == token.line and nxt.kind == "name":
            names.add(self.identifier("nonterminal type"))
        self.declared = names

    def rule(self) -> TransductionRule:
        line = self.expect("rule").line
        head = self.identifier("rule head")
        name = f"{head}#{len(self.rules) + 1}"
        if self.at("["):
            self.index += 1
            name = self.identifier("rule name")
            self.expect("]")
        self.expect("on")
        pattern = self.pattern()
        clauses: list[Clause] = []
        while True:
            if self.at("where"):
                self.index += 1
                clauses.append(self.guard())
                while self.at("and"):
                    self.index += 1
                    clauses.append(self.guard())
            elif self.at("let"):
                self.index += 1
                clauses.append(self.binding())
                while self.at(";"):
                    self.index += 1
                    clauses.append(self.binding())
            else:
                break
        self.expect("say")
        raw = self.take("string", "template string")
        template = _parse_template(json.loads(raw.text), raw.line, name)
        rule = TransductionRule(head, name, pattern, tuple(clauses), template, line)
        _check_bindings(rule)
        return rule

    def pattern(self) -> Pattern:
        token = self.peek()
        if token is None or token.kind != "name":
            raise RuleSyntaxError("expected a pattern", self.line())
        if token.text == "_":
            self.index += 1
            return Wildcard()
        nxt = self.peek(1)
        if nxt is not None and nxt.text == "(":
            return self.call_pattern()
        name = self.identifier("pattern variable")
        if self.at(":"):
            self.index += 1
            return Capture(name, tag=self.take("name", "type tag").text)
        if self.at("@"):
            self.index += 1
            return Capture(name, inner=self.call_pattern())
        return Capture(name)

    def call_pattern(self) -> CallPattern:
        op = self.take("name", "function name").text
        self.expect("(")
        args: list[Pattern] = []
        open_ended = False
        while not self.at(")"):
            if args or open_ended:
                self.expect(",")
            if self.at("..."):
                self.index += 1
                open_ended = True
                break
            args.append(self.pattern())
        self.expect(")")
        return CallPattern(op, tuple(args), open_ended)

    def guard(self) -> Guard:
        left = self.expr()
        token = self.peek()
        if token is not None and token.kind == "cmp":
            self.index += 1
            return Guard(left, token.text, self.expr())
        return Guard(left)

    def binding(self) -> Let:
        var = self.identifier("let variable")
        self.expect("=")
        return Let(var, self.expr())

    def expr(self) -> Expr:
        token = self.peek()
        if token is None:
            raise RuleSyntaxError("expected an expression, found end of input", self.line())
        if token.kind == "number":
            self.index += 1
            return Const(float(token.text) if "." in token.text else int(token.text))
        if token.kind == "string":
            self.index += 1
            return Const(json.loads(token.text))
        if token.kind == "name" and token.text in ("true", "false"):
            self.index += 1
            return Const(token.text == "true")
        nxt = self.peek(1)
        if token.kind == "name" and nxt is not None and nxt.text == "(":
            func = self.identifier("function name")
            self.expect("(")
            args: list[Expr] = []
            while not self.at(")"):
                if args:
                    self.expect(",")
                args.append(self.expr())
            self.expect(")")
            return Call(func, tuple(args))
        return Var(self.identifier("expression"))

    def finish(self) -> RuleSet:
        heads = {rule.head for rule in self.rules}
        declared = set(self.declared) if self.declared is not None else set(heads)
        declared.add(LEX)
        for rule in self.rules:
            if rule.head not in declared:
                raise RuleError(
                    f"line {rule.line}: rule {rule.name} has undeclared head {rule.head}"
                )
            for slot in rule.slots():
                if slot.type not in declared:
                    raise RuleError(
                        f"line {rule.line}: rule {rule.name} refers to unknown "
                        f"nonterminal {slot.type}"
                    )
        start = self.start or (self.rules[0].head if self.rules else None)
        if start is None:
            raise RuleError("rule file declares no rules and no start type")
        if start not in declared:
            raise RuleError(f"line {self.start_line}: start type {start} is not declared")
        functions = frozenset(
            func
            for rule in self.rules
            for clause in rule.clauses
            for expr in (clause.expressions() if isinstance(clause, Guard) else [clause.expr])
            for func in expr_functions(expr)
        )
        return RuleSet(tuple(self.rules), frozenset(declared), start, functions)


def _parse_template(text: str, line: int, rule_name: str) -> tuple[TemplateItem, ...]:
    items: list[TemplateItem] = []
    for piece in _TEMPLATE_PIECE.findall(text):
        if piece.startswith("{"):
            slot = _SLOT.fullmatch(piece)
            if slot is None:
                raise RuleSyntaxError(f"malformed template slot {piece!r}", line)
            items.append(Slot(slot.group("type"), slot.group("var")))
        elif piece == "}":
            raise RuleSyntaxError("unbalanced '}' in template", line)
        else:
            items.append(Word(piece))
    if not items:
        raise RuleError(f"line {line}: rule {rule_name} has an empty template")
    return tuple(items)


def _check_bindings(rule: TransductionRule) -> None:
    bound = {SELF}
    for name in pattern_variables(rule.pattern):
        if name in bound and name != SELF:
            continue
        bound.add(name)

    def need(names: Iterator[str], where: str) -> None:
        for name in names:
            if name not in bound:
                raise RuleError(
                    f"line {rule.line}: rule {rule.name} uses unbound variable '{name}' in {where}"
                )

    for clause in rule.clauses:
        if isinstance(clause, Guard):
            for expr in clause.expressions():
                need(expr_variables(expr), "where")
        else:
            need(expr_variables(clause.expr), f"let {clause.var}")
            if clause.var in bound:
                raise RuleError(f"line {rule.line}: rule {rule.name} rebinds '{clause.var}'")
            bound.add(clause.var)
    need((slot.var for slot in rule.slots()), "template")


def parse_rule_file(text: str, registry: FunctionRegistry | None = None) -> RuleSet:
    """Parse a rule file into a :class:`RuleSet`.

    Args:
        text: Rule file contents.
        registry: When given, function names in clauses must be registered.

    Returns:
        The parsed rules with declared nonterminals and start type.

    Raises:
        RuleSyntaxError: On malformed text (with line number).
        RuleError: On static errors such as unbound variables, unknown
            nonterminals, unknown functions or empty templates.
    """
    ruleset = _RuleParser(text).parse()
    if registry is not None:
        ruleset.check_functions(registry)
    return ruleset


def parse_rules(text: str, registry: FunctionRegistry | None = None) -> list[TransductionRule]:
    """Parse rule text and return the rules in file order."""
    return list(parse_rule_file(text, registry).rules)
