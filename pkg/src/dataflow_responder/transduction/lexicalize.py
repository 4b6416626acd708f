"""Built-in realizations of primitive node values for the ``LEX`` type."""

from datetime import date, datetime, time
from typing import Any

from dataflow_responder.dataflow.calendar import clock_time, month_day, number_word

_RELATIVE_DAYS = {-1: "yesterday", 0: "today", 1: "tomorrow"}


def _text_words(text: str) -> tuple[str, ...]:
    return tuple(text.split())


def _list_words(items: list[Any]) -> tuple[str, ...] | None:
    if not items or not all(isinstance(item, str) and item.strip() for item in items):
        return None
    parts = [_text_words(item) for item in items]
    if len(parts) == 1:
        return parts[0]
    words: list[str] = []
    for i, part in enumerate(parts[:-1]):
        if i:
            words.append(",")
        words.extend(part)
    return (*words, "and", *parts[-1])


def lexicalize(value: Any, now: datetime | None = None) -> list[tuple[str, ...]]:
    """Word sequences that render ``value`` verbatim, preferred form first.

    Args:
        value: An evaluated node value.
        now: Execution timestamp; enables ``today``/``tomorrow``/``yesterday``.

    Returns:
        Distinct realizations; empty when the value has no surface form.
    """
    out: list[tuple[str, ...]] = []
    if isinstance(value, bool):
        out.append(("yes",) if value else ("no",))
    elif isinstance(value, int):
        word = number_word(value)
        if word is not None:
            out.append((word,))
        out.append((str(value),))
    elif isinstance(value, float):
        out.append((f"{value:g}",))
    elif isinstance(value, str):
        if value.strip():
            out.append(_text_words(value))
    elif isinstance(value, datetime | time):
        out.append(_text_words(clock_time(value)))
    elif isinstance(value, date):
        if now is not None:
            relative = _RELATIVE_DAYS.get((value - now.date()).days)
            if relative is not None:
                out.append((relative,))
        out.append(("on", *_text_words(month_day(value))))
    elif isinstance(value, list):
        words = _list_words(value)
        if words is not None:
            out.append(words)
    return list(dict.fromkeys(out))
