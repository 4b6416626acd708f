"""Incremental Earley recognition over token grammars.

A :class:`DecoderState` is an immutable value: advancing returns a new state
that shares every earlier chart column with its parent, so beam hypotheses can
branch freely. Items are ``(production, dot, origin, offset)`` where ``offset``
counts tokens already matched inside a multi-token terminal.
"""

from collections import defaultdict
from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

from dataflow_responder.errors import EmptyLanguage, IllegalToken
from dataflow_responder.grammar.tokens import TokenGrammar


class Item(NamedTuple):
    """A dotted production with its origin column."""

    production: int
    dot: int
    origin: int
    offset: int = 0


class AllowedNext(NamedTuple):
    """Tokens that may follow the consumed prefix, and whether it may end here."""

    tokens: frozenset[int]
    eos: bool


@dataclass(frozen=True, eq=False)
class Column:
    """One closed chart column with lookup tables for scanning and completion."""

    items: tuple[Item, ...]
    waiting: Mapping[int, tuple[Item, ...]]
    scans: Mapping[int, tuple[Item, ...]]
    accepting: bool


def _close(
    grammar: TokenGrammar, seeds: list[Item], position: int, columns: tuple[Column, ...]
) -> Column:
    """Close ``seeds`` under predict and complete at ``position``."""
    seen: dict[Item, None] = {}
    agenda = list(seeds)
    waiting: dict[int, list[Item]] = defaultdict(list)
    scans: dict[int, list[Item]] = defaultdict(list)
    predicted: set[int] = set()
    accepting = False
    while agenda:
        item = agenda.pop()
        if item in seen:
            continue
        seen[item] = None
        production = grammar.productions[item.production]
        if item.dot == len(production.rhs):
            if item.origin == 0 and production.lhs == grammar.start:
                accepting = True
            # no empty productions, so completed items always start in an earlier column
            for parent in columns[item.origin].waiting.get(production.lhs, ()):
                agenda.append(Item(parent.production, parent.dot + 1, parent.origin))
            continue
        symbol = production.rhs[item.dot]
        if isinstance(symbol, int):
            waiting[symbol].append(item)
            if symbol not in predicted:
                predicted.add(symbol)
                agenda.extend(Item(p, 0, position) for p in grammar.by_lhs.get(symbol, ()))
        else:
            scans[symbol[item.offset]].append(item)
    return Column(
        items=tuple(seen),
        waiting={k: tuple(v) for k, v in waiting.items()},
        scans={k: tuple(v) for k, v in scans.items()},
        accepting=accepting,
    )


@dataclass(frozen=True, eq=False)
class DecoderState:
    """Chart over a consumed token prefix."""

    grammar: TokenGrammar
    columns: tuple[Column, ...]
    consumed: tuple[int, ...] = ()

    @classmethod
    def initial(cls, grammar: TokenGrammar) -> "DecoderState":
        """Build column 0 from the start symbol's productions.

        Raises:
            EmptyLanguage: If the grammar derives no string.
        """
        seeds = [Item(p, 0, 0) for p in grammar.by_lhs.get(grammar.start, ())]
        column = _close(grammar, seeds, 0, ())
        if not column.scans:
            raise EmptyLanguage("grammar derives no token sequence")
        return cls(grammar, (column,))

    @property
    def column(self) -> Column:
        """The newest chart column."""
        return self.columns[-1]

    @property
    def accepts(self) -> bool:
        """Whether the consumed prefix is a complete sentence."""
        return self.column.accepting

    @cached_property
    def allowed(self) -> AllowedNext:
        """Cached :class:`AllowedNext` for this state."""
        return AllowedNext(frozenset(self.column.scans), self.column.accepting)

    def allowed_next(self) -> AllowedNext:
        """Tokens that keep the prefix grammatical, plus the end-of-sequence flag."""
        return self.allowed

    def advance(self, token: int) -> "DecoderState":
        """Consume ``token`` and return the successor state.

        Raises:
            IllegalToken: If ``token`` cannot extend the prefix.
        """
        movers = self.column.scans.get(token)
        if not movers:
            raise IllegalToken(
                f"token {token} not allowed after {len(self.consumed)} tokens"
            )
        seeds: list[Item] = []
        for item in movers:
            terminal = self.grammar.productions[item.production].rhs[item.dot]
            assert isinstance(terminal, tuple)
            if item.offset + 1 < len(terminal):
                seeds.append(Item(item.production, item.dot, item.origin, item.offset + 1))
            else:
                seeds.append(Item(item.production, item.dot + 1, item.origin))
        position = len(self.columns)
        column = _close(self.grammar, seeds, position, self.columns)
        return DecoderState(self.grammar, (*self.columns, column), (*self.consumed, token))

    def chart_size(self) -> int:
        """Total items over all columns."""
        return sum(len(column.items) for column in self.columns)


def init(grammar: TokenGrammar) -> DecoderState:
    """Initial decoder state for ``grammar``."""
    return DecoderState.initial(grammar)


def allowed_next(state: DecoderState) -> AllowedNext:
    """Allowed continuations of ``state``."""
    return state.allowed_next()


def advance(state: DecoderState, token: int) -> DecoderState:
    """Advance ``state`` by ``token``."""
    return state.advance(token)
