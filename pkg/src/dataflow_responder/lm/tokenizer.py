"""Word-piece tokenizer shared by grammars and scorers.

Pieces that begin a word carry the ``▁`` marker; continuation pieces do not.
A word-level vocabulary is simply one ``▁word`` piece per word. The id one past
the last piece is reserved for end-of-sequence.
"""

import hashlib
import re
import string
from collections.abc import Iterable, Sequence
from functools import cached_property

from dataflow_responder.errors import UnknownToken

WORD_START = "▁"
_FALLBACK_CHARS = string.ascii_letters + string.digits + string.punctuation
_PROMPT_WORD = re.compile(r"\S+")


class Tokenizer:
    """Bidirectional map between pieces and ids with greedy word encoding."""

    def __init__(self, pieces: Sequence[str]) -> None:
        """Initialize from an ordered piece list.

        Args:
            pieces: Surface pieces; position is the token id.

        Raises:
            ValueError: On duplicate or empty pieces.
        """
        if len(set(pieces)) != len(pieces):
            raise ValueError("duplicate pieces in vocabulary")
        if any(not piece or piece == WORD_START for piece in pieces):
            raise ValueError("empty piece in vocabulary")
        self.pieces: tuple[str, ...] = tuple(pieces)
        self._ids = {piece: i for i, piece in enumerate(self.pieces)}
        self._longest = max((len(p) for p in self.pieces), default=0)

    @classmethod
    def word_level(cls, words: Iterable[str], char_fallback: bool = False) -> "Tokenizer":
        """Build a vocabulary with one piece per distinct word (sorted).

        Args:
            words: Words to cover.
            char_fallback: Also add single-character pieces so that any ASCII
                word can be spelled.

        Returns:
            The tokenizer.
        """
        pieces = [WORD_START + w for w in sorted(set(words))]
        if char_fallback:
            seen = set(pieces)
            for ch in _FALLBACK_CHARS:
                for piece in (WORD_START + ch, ch):
                    if piece not in seen:
                        seen.add(piece)
                        pieces.append(piece)
        return cls(pieces)

    @property
    def size(self) -> int:
        """Number of pieces (EOS excluded)."""
        return len(self.pieces)

    @property
    def eos_id(self) -> int:
        """Id of the end-of-sequence symbol."""
        return len(self.pieces)

    def piece(self, token_id: int) -> str:
        """Surface piece for an id."""
        return self.pieces[token_id]

    def word_id(self, word: str) -> int | None:
        """Id of the whole-word piece for ``word``, if present."""
        return self._ids.get(WORD_START + word)

    def encode_word(self, word: str) -> tuple[int, ...]:
        """Encode one word, preferring a whole-word piece, else greedy longest match.

        Raises:
            UnknownToken: If the word cannot be spelled with the vocabulary.
        """
        whole = self.word_id(word)
        if whole is not None:
            return (whole,)
        text = WORD_START + word
        ids: list[int] = []
        pos = 0
        while pos < len(text):
            for end in range(min(len(text), pos + self._longest), pos, -1):
                candidate = self._ids.get(text[pos:end])
                if candidate is not None and (pos > 0 or end > 1):
                    ids.append(candidate)
                    pos = end
                    break
            else:
                raise UnknownToken(f"cannot tokenize {word!r}")
        return tuple(ids)

    def encode(self, text: str) -> list[int]:
        """Encode whitespace-separated words."""
        return [i for word in text.split() for i in self.encode_word(word)]

    def decode(self, ids: Iterable[int]) -> str:
        """Concatenate pieces into text; the EOS id is dropped."""
        out = "".join(self.pieces[i] for i in ids if i != self.eos_id)
        return out.replace(WORD_START, " ").strip()

    def known_ids(self, text: str) -> list[int]:
        """Whole-word ids for the words of ``text`` that are in the vocabulary."""
        ids = (self.word_id(word) for word in _PROMPT_WORD.findall(text))
        return [i for i in ids if i is not None]

    @cached_property
    def digest(self) -> str:
        """SHA-256 over ``id<TAB>piece`` lines in id order."""
        body = "\n".join(f"{i}\t{piece}" for i, piece in enumerate(self.pieces))
        return hashlib.sha256(body.encode("utf-8")).hexdigest()

    def __len__(self) -> int:
        return len(self.pieces)
