"""Per-input quasi-synchronous grammars.

Nonterminals pair a nonterminal type with a graph node (``EVENT@v4``); terminals
are whitespace-free words. A :class:`Qcfg` is immutable once built and supports
random derivation, bounded enumeration in length-lexicographic order and
membership parsing with a witness derivation.
"""

import json
import logging
import math
import random
from collections import defaultdict
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import Any

from dataflow_responder.errors import DepthExceeded, GrammarError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Nonterminal:
    """A (type, node) grammar symbol."""

    type: str
    node: str

    def __str__(self) -> str:
        return f"{self.type}@{self.node}"

    @classmethod
    def parse(cls, text: str) -> "Nonterminal":
        """Parse the ``TYPE@node`` encoding.

        Raises:
            GrammarError: If the text has no ``@`` separator.
        """
        type_, sep, node = text.partition("@")
        if not sep or not type_ or not node:
            raise GrammarError(f"malformed nonterminal {text!r}")
        return cls(type_, node)


@dataclass(frozen=True)
class Terminal:
    """A single output word."""

    word: str

    def __post_init__(self) -> None:
        if not self.word or any(ch.isspace() for ch in self.word):
            raise GrammarError(f"terminal words must be non-empty and unspaced: {self.word!r}")

    def __str__(self) -> str:
        return json.dumps(self.word, ensure_ascii=False)


Symbol = Terminal | Nonterminal


@dataclass(frozen=True)
class Production:
    """``lhs -> rhs`` with a non-empty right-hand side."""

    lhs: Nonterminal
    rhs: tuple[Symbol, ...]

    def __post_init__(self) -> None:
        if not self.rhs:
            raise GrammarError(f"production for {self.lhs} has an empty right-hand side")

    def nonterminals(self) -> list[Nonterminal]:
        """Right-hand-side nonterminals in order."""
        return [sym for sym in self.rhs if isinstance(sym, Nonterminal)]

    @property
    def is_unit(self) -> bool:
        """Whether the rhs is a single nonterminal."""
        return len(self.rhs) == 1 and isinstance(self.rhs[0], Nonterminal)

    def __str__(self) -> str:
        return f"{self.lhs} -> {' '.join(str(sym) for sym in self.rhs)}"


@dataclass(frozen=True)
class Derivation:
    """A derivation tree: one child per rhs nonterminal, in order."""

    production: Production
    children: tuple["Derivation", ...] = ()

    def words(self) -> list[str]:
        """Yield of the tree."""
        out: list[str] = []
        kids = iter(self.children)
        for sym in self.production.rhs:
            if isinstance(sym, Terminal):
                out.append(sym.word)
            else:
                out.extend(next(kids).words())
        return out

    def text(self) -> str:
        """Yield joined by single spaces."""
        return " ".join(self.words())

    def productions(self) -> Iterator[Production]:
        """Productions used, in pre-order."""
        yield self.production
        for child in self.children:
            yield from child.productions()


@dataclass(frozen=True)
class GrammarStats:
    """Size summary of a grammar."""

    productions: int
    nonterminals: int
    terminals: int


Chooser = Callable[[Nonterminal, Sequence[Production]], Production]


@dataclass(frozen=True)
class Qcfg:
    """A grammar with a start symbol and productions in creation order.

    Raises:
        GrammarError: If the start symbol or any rhs nonterminal lacks productions.
    """

    start: Nonterminal
    productions: tuple[Production, ...]
    _by_lhs: dict[Nonterminal, tuple[Production, ...]] = field(
        init=False, repr=False, compare=False
    )
    _heights: dict[Nonterminal, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        grouped: dict[Nonterminal, list[Production]] = defaultdict(list)
        for production in self.productions:
            grouped[production.lhs].append(production)
        by_lhs = {lhs: tuple(prods) for lhs, prods in grouped.items()}
        if self.start not in by_lhs:
            raise GrammarError(f"start symbol {self.start} has no productions")
        missing = sorted(
            {str(nt) for p in self.productions for nt in p.nonterminals() if nt not in by_lhs}
        )
        if missing:
            raise GrammarError("nonterminals without productions: " + ", ".join(missing))
        object.__setattr__(self, "_by_lhs", by_lhs)
        object.__setattr__(self, "_heights", _min_heights(by_lhs))

    @property
    def nonterminals(self) -> list[Nonterminal]:
        """Nonterminals with productions, in first-seen order."""
        return list(self._by_lhs)

    @property
    def sigma(self) -> frozenset[str]:
        """Terminal vocabulary."""
        return frozenset(
            sym.word for p in self.productions for sym in p.rhs if isinstance(sym, Terminal)
        )

    def productions_for(self, nonterminal: Nonterminal) -> tuple[Production, ...]:
        """Productions with ``nonterminal`` on the left."""
        return self._by_lhs.get(nonterminal, ())

    def stats(self) -> GrammarStats:
        """Count productions, nonterminals and distinct terminal words."""
        return GrammarStats(
            productions=len(self.productions),
            nonterminals=len(self._by_lhs),
            terminals=len(self.sigma),
        )

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible form with ``TYPE@node`` nonterminals."""
        return {
            "start": str(self.start),
            "productions": [
                {
                    "lhs": str(p.lhs),
                    "rhs": [
                        {"t": sym.word} if isinstance(sym, Terminal) else {"nt": str(sym)}
                        for sym in p.rhs
                    ],
                }
                for p in self.productions
            ],
        }

    def to_json(self) -> str:
        """Serialize to indented JSON text."""
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str | dict[str, Any]) -> "Qcfg":
        """Load a grammar written by :meth:`to_json`.

        Raises:
            GrammarError: On malformed input.
        """
        try:
            data = json.loads(text) if isinstance(text, str) else text
            productions = []
            for entry in data["productions"]:
                rhs: list[Symbol] = []
                for item in entry["rhs"]:
                    if "t" in item:
                        rhs.append(Terminal(item["t"]))
                    else:
                        rhs.append(Nonterminal.parse(item["nt"]))
                productions.append(Production(Nonterminal.parse(entry["lhs"]), tuple(rhs)))
            return cls(Nonterminal.parse(data["start"]), tuple(productions))
        except (KeyError, TypeError, ValueError) as exc:
            raise GrammarError(f"malformed grammar JSON: {exc}") from exc

    # -- derivation ----------------------------------------------------------

    def derive(self, chooser: Chooser, max_depth: int) -> Derivation:
        """Build one derivation, letting ``chooser`` pick among feasible productions.

        A production is feasible when its subtree can finish within the depth
        still available (the start symbol sits at depth 1).

        Raises:
            DepthExceeded: If no derivation fits within ``max_depth``.
        """
        if self._heights[self.start] > max_depth:
            raise DepthExceeded(
                f"every derivation of {self.start} is deeper than {max_depth}"
            )
        return self._derive(self.start, max_depth, chooser)

    def _derive(self, nonterminal: Nonterminal, budget: int, chooser: Chooser) -> Derivation:
        feasible = [
            p for p in self._by_lhs[nonterminal] if _production_height(p, self._heights) <= budget
        ]
        production = chooser(nonterminal, feasible)
        children = tuple(self._derive(nt, budget - 1, chooser) for nt in production.nonterminals())
        return Derivation(production, children)

    def sample(self, seed: int, max_depth: int = 64) -> str:
        """Sample one string, choosing uniformly among feasible productions."""
        return self.samples(seed, 1, max_depth)[0]

    def samples(self, seed: int, count: int, max_depth: int = 64) -> list[str]:
        """Draw ``count`` strings from one seeded random stream."""
        rng = random.Random(seed)

        def choose(_: Nonterminal, options: Sequence[Production]) -> Production:
            return options[rng.randrange(len(options))]

        return [self.derive(choose, max_depth).text() for _ in range(count)]

    # -- enumeration ---------------------------------------------------------

    def enumerate(self, limit: int, max_length: int | None = None) -> list[str]:
        """List distinct strings shortest first, lexicographic within a length.

        Args:
            limit: Maximum number of strings returned.
            max_length: Optional cap on string length in words.

        Returns:
            Up to ``limit`` strings; all of them when the language is finite and smaller.
        """
        if limit < 1:
            raise ValueError("limit must be at least 1")
        bound = _longest_yield(self.start, self._by_lhs)
        if max_length is not None:
            bound = max_length if bound is None else min(bound, max_length)
        table: dict[tuple[Nonterminal, int], set[tuple[str, ...]]] = {}
        out: list[str] = []
        length = 0
        while len(out) < limit and (bound is None or length < bound):
            length += 1
            self._fill_length(table, length)
            for words in sorted(table.get((self.start, length), ())):
                out.append(" ".join(words))
                if len(out) >= limit:
                    break
        return out

    def _fill_length(
        self, table: dict[tuple[Nonterminal, int], set[tuple[str, ...]]], n: int
    ) -> None:
        for lhs, prods in self._by_lhs.items():
            found: set[tuple[str, ...]] = set()
            for production in prods:
                if not production.is_unit:
                    found |= _yields(production.rhs, n, table)
            table[(lhs, n)] = found
        changed = True
        while changed:
            changed = False
            for production in self.productions:
                if production.is_unit:
                    child = table[(production.rhs[0], n)]  # type: ignore[index]
                    target = table[(production.lhs, n)]
                    if not child <= target:
                        target |= child
                        changed = True

    # -- membership ----------------------------------------------------------

    def parse(self, words: Sequence[str]) -> Derivation | None:
        """Return a derivation of ``words`` from the start symbol, or None.

        This is a chart recognizer over whole words, kept separate from the
        token-level Earley recognizer in :mod:`dataflow_responder.grammar.earley`
        so decoder output can be checked by an independent implementation.
        """
        words = tuple(words)
        n = len(words)
        if n == 0:
            return None
        chart: dict[tuple[int, int], dict[Nonterminal, Derivation]] = {}
        for span in range(1, n + 1):
            for i in range(0, n - span + 1):
                j = i + span
                cell: dict[Nonterminal, Derivation] = {}
                chart[(i, j)] = cell
                for production in self.productions:
                    if production.is_unit or production.lhs in cell:
                        continue
                    kids = _match(production.rhs, 0, i, j, words, chart)
                    if kids is not None:
                        cell[production.lhs] = Derivation(production, kids)
                changed = True
                while changed:
                    changed = False
                    for production in self.productions:
                        if production.is_unit and production.lhs not in cell:
                            child = cell.get(production.rhs[0])  # type: ignore[arg-type]
                            if child is not None:
                                cell[production.lhs] = Derivation(production, (child,))
                                changed = True
        return chart[(0, n)].get(self.start)

    def contains(self, words: Sequence[str] | str) -> bool:
        """Whether the word sequence (or space-separated string) is in the language."""
        if isinstance(words, str):
            words = words.split()
        return self.parse(words) is not None


def _production_height(production: Production, heights: dict[Nonterminal, float]) -> float:
    return 1 + max((heights[nt] for nt in production.nonterminals()), default=0)


def _min_heights(by_lhs: dict[Nonterminal, tuple[Production, ...]]) -> dict[Nonterminal, float]:
    """Minimum derivation height per nonterminal (inf when unproductive)."""
    heights: dict[Nonterminal, float] = dict.fromkeys(by_lhs, math.inf)
    changed = True
    while changed:
        changed = False
        for lhs, prods in by_lhs.items():
            best = min(_production_height(p, heights) for p in prods)
            if best < heights[lhs]:
                heights[lhs] = best
                changed = True
    return heights


def _live(
    start: Nonterminal, by_lhs: dict[Nonterminal, tuple[Production, ...]]
) -> set[Nonterminal]:
    """Productive nonterminals reachable from ``start`` through productive productions."""
    heights = _min_heights(by_lhs)
    productive = {nt for nt, h in heights.items() if h < math.inf}
    live = {start} if start in productive else set()
    frontier = list(live)
    while frontier:
        for production in by_lhs[frontier.pop()]:
            children = production.nonterminals()
            if any(nt not in productive for nt in children):
                continue
            for nt in children:
                if nt not in live:
                    live.add(nt)
                    frontier.append(nt)
    return live


def _longest_yield(
    start: Nonterminal, by_lhs: dict[Nonterminal, tuple[Production, ...]]
) -> int | None:
    """Longest string derivable from ``start``, or None if unbounded."""
    live = _live(start, by_lhs)
    longest: dict[Nonterminal, int] = dict.fromkeys(live, 0)
    for _ in range(len(live) + 2):
        changed = False
        for lhs in live:
            for production in by_lhs[lhs]:
                if any(nt not in live for nt in production.nonterminals()):
                    continue
                total = sum(
                    1 if isinstance(sym, Terminal) else longest[sym] for sym in production.rhs
                )
                if total > longest[lhs]:
                    longest[lhs] = total
                    changed = True
        if not changed:
            return longest.get(start, 0)
    return None


def _yields(
    rhs: Sequence[Symbol], n: int, table: dict[tuple[Nonterminal, int], set[tuple[str, ...]]]
) -> set[tuple[str, ...]]:
    """All word tuples of length ``n`` derivable from ``rhs`` using shorter table entries."""
    if not rhs:
        return {()} if n == 0 else set()
    head, rest = rhs[0], rhs[1:]
    out: set[tuple[str, ...]] = set()
    for k in range(1, n - len(rest) + 1):
        if isinstance(head, Terminal):
            if k != 1:
                break
            heads: set[tuple[str, ...]] = {(head.word,)}
        else:
            heads = table.get((head, k), set())
        if not heads:
            continue
        tails = _yields(rest, n - k, table)
        out.update(h + t for h in heads for t in tails)
    return out


def _match(
    rhs: Sequence[Symbol],
    index: int,
    i: int,
    j: int,
    words: tuple[str, ...],
    chart: dict[tuple[int, int], dict[Nonterminal, Derivation]],
) -> tuple[Derivation, ...] | None:
    """Match ``rhs[index:]`` against ``words[i:j]``; return child derivations."""
    remaining = len(rhs) - index
    if remaining == 0:
        return () if i == j else None
    if j - i < remaining:
        return None
    sym = rhs[index]
    if isinstance(sym, Terminal):
        if words[i] != sym.word:
            return None
        return _match(rhs, index + 1, i + 1, j, words, chart)
    last = j - (remaining - 1)
    for k in range(i + 1, last + 1):
        child = chart.get((i, k), {}).get(sym)
        if child is None:
            continue
        rest = _match(rhs, index + 1, k, j, words, chart)
        if rest is not None:
            return (child, *rest)
    return None
