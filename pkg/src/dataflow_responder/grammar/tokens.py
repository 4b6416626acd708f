"""Token-level grammars compiled from word-level QCFGs."""

import logging
from collections import defaultdict
from dataclasses import dataclass, field

from dataflow_responder.grammar.qcfg import Nonterminal, Qcfg, Terminal
from dataflow_responder.lm.tokenizer import Tokenizer

logger = logging.getLogger(__name__)

# rhs symbols: an int is a nonterminal index, a tuple is one word's token ids
TokenSymbol = int | tuple[int, ...]


@dataclass(frozen=True)
class TokenProduction:
    """Production over nonterminal indices and token-id terminals."""

    lhs: int
    rhs: tuple[TokenSymbol, ...]


@dataclass(frozen=True)
class TokenGrammar:
    """A grammar whose terminals are token-id sequences under ``tokenizer``.

    Only useful productions (productive and reachable from the start symbol)
    are kept; an empty production list means the language is empty.
    """

    start: int
    productions: tuple[TokenProduction, ...]
    names: tuple[str, ...]
    tokenizer: Tokenizer = field(repr=False, compare=False)
    by_lhs: dict[int, tuple[int, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        grouped: dict[int, list[int]] = defaultdict(list)
        for index, production in enumerate(self.productions):
            grouped[production.lhs].append(index)
        object.__setattr__(self, "by_lhs", {lhs: tuple(ids) for lhs, ids in grouped.items()})

    @property
    def eos_id(self) -> int:
        """End-of-sequence id of the tokenizer."""
        return self.tokenizer.eos_id

    def decode(self, ids: tuple[int, ...] | list[int]) -> str:
        """Detokenize a token sequence."""
        return self.tokenizer.decode(ids)


def compile_tokens(grammar: Qcfg, tokenizer: Tokenizer) -> TokenGrammar:
    """Expand every terminal word into its token ids.

    Args:
        grammar: Word-level grammar.
        tokenizer: Tokenizer covering every terminal.

    Returns:
        The token grammar with useless productions removed.

    Raises:
        UnknownToken: If a terminal word cannot be tokenized.
    """
    names: dict[Nonterminal, int] = {}

    def index(nt: Nonterminal) -> int:
        return names.setdefault(nt, len(names))

    start = index(grammar.start)
    encoded: dict[str, tuple[int, ...]] = {}
    raw: list[TokenProduction] = []
    for production in grammar.productions:
        rhs: list[TokenSymbol] = []
        for sym in production.rhs:
            if isinstance(sym, Terminal):
                if sym.word not in encoded:
                    encoded[sym.word] = tokenizer.encode_word(sym.word)
                rhs.append(encoded[sym.word])
            else:
                rhs.append(index(sym))
        raw.append(TokenProduction(index(production.lhs), tuple(rhs)))

    kept = _useful(raw, start)
    logger.debug("compiled %d of %d productions to tokens", len(kept), len(raw))
    return TokenGrammar(
        start=start,
        productions=tuple(kept),
        names=tuple(str(nt) for nt in names),
        tokenizer=tokenizer,
    )


def _useful(productions: list[TokenProduction], start: int) -> list[TokenProduction]:
    productive: set[int] = set()
    changed = True
    while changed:
        changed = False
        for p in productions:
            if p.lhs not in productive and all(
                not isinstance(sym, int) or sym in productive for sym in p.rhs
            ):
                productive.add(p.lhs)
                changed = True
    alive = [p for p in productions if p.lhs in productive and all(
        not isinstance(sym, int) or sym in productive for sym in p.rhs
    )]  # fmt: skip
    reachable = {start} if start in productive else set()
    frontier = list(reachable)
    while frontier:
        lhs = frontier.pop()
        for p in alive:
            if p.lhs == lhs:
                for sym in p.rhs:
                    if isinstance(sym, int) and sym not in reachable:
                        reachable.add(sym)
                        frontier.append(sym)
    return [p for p in alive if p.lhs in reachable]
