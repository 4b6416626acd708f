"""Runtime values carried by dataflow nodes.

Values are plain Python objects (``int``, ``float``, ``str``, ``bool``, ``date``,
``time``, ``datetime``, ``list``, ``None``) plus :class:`Record` for typed
structures such as calendar events.
"""

import json
from datetime import date, datetime, time
from typing import Any

from pydantic import BaseModel, ConfigDict, Field

LITERAL_KINDS = ("Number", "Integer", "Text", "Boolean", "Date", "Time", "DateTime")


class Record(BaseModel):
    """A typed record: a type tag plus named field values."""

    model_config = ConfigDict(frozen=True)

    tag: str = Field(description="Record type, e.g. Event")
    fields: dict[str, Any] = Field(default_factory=dict, description="Named field values")

    def get(self, name: str) -> Any:
        """Return a field value.

        Args:
            name: Field name.

        Returns:
            The field value.

        Raises:
            KeyError: If the record has no such field.
        """
        return self.fields[name]


def value_tag(value: Any) -> str:
    """Return the outermost tag of a value.

    Args:
        value: Any node value.

    Returns:
        Tag name; records report their own tag (e.g. ``Event``).
    """
    # bool before int and datetime before date: both are subclasses
    if value is None:
        return "Null"
    if isinstance(value, bool):
        return "Boolean"
    if isinstance(value, int):
        return "Integer"
    if isinstance(value, float):
        return "Number"
    if isinstance(value, str):
        return "Text"
    if isinstance(value, datetime):
        return "DateTime"
    if isinstance(value, date):
        return "Date"
    if isinstance(value, time):
        return "Time"
    if isinstance(value, list):
        return "List"
    if isinstance(value, Record):
        return value.tag
    raise TypeError(f"unsupported value type {type(value).__name__}")


def matches_tag(value: Any, tag: str) -> bool:
    """Check a value against a signature tag.

    ``Any`` matches everything, ``Number`` also accepts integers and ``Record``
    accepts any record.

    Args:
        value: Value to check.
        tag: Signature tag.

    Returns:
        True when the value conforms.
    """
    if tag == "Any":
        return True
    actual = value_tag(value)
    if tag == "Number":
        return actual in ("Number", "Integer")
    if tag == "Record":
        return isinstance(value, Record)
    return actual == tag


def make_list(items: list[Any]) -> list[Any]:
    """Build a list value, enforcing that all elements share one tag.

    Args:
        items: Element values.

    Returns:
        The same items as a list.

    Raises:
        TypeError: If element tags differ.
    """
    tags = {value_tag(item) for item in items}
    if len(tags) > 1:
        raise TypeError(f"heterogeneous list with tags {sorted(tags)}")
    return list(items)


def to_json_value(value: Any) -> Any:
    """Convert a value into JSON-compatible data (ISO-8601 for temporal values)."""
    if isinstance(value, date | time):
        return value.isoformat()
    if isinstance(value, list):
        return [to_json_value(item) for item in value]
    if isinstance(value, Record):
        return {name: to_json_value(value.fields[name]) for name in sorted(value.fields)}
    return value


def render_json(value: Any) -> str:
    """Render a value as canonical JSON with sorted record keys.

    Args:
        value: Value to render.

    Returns:
        JSON text.
    """
    return json.dumps(to_json_value(value), sort_keys=True, ensure_ascii=False)
