"""In-memory calendar fixture and the calendar function pack."""

import hashlib
import json
import logging
from datetime import date, datetime, time, timedelta
from importlib.resources import files
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError

from dataflow_responder.dataflow.registry import ExecutionContext, FunctionRegistry
from dataflow_responder.dataflow.values import Record, make_list
from dataflow_responder.errors import ConfigError

logger = logging.getLogger(__name__)

_NUMBER_WORDS = (
    "one", "two", "three", "four", "five", "six",
    "seven", "eight", "nine", "ten", "eleven", "twelve",
)  # fmt: skip


class CalendarEvent(BaseModel):
    """One event in the calendar fixture."""

    id: str = Field(description="Event id")
    subject: str = Field(description="Event subject")
    start: datetime = Field(description="Start timestamp")
    end: datetime = Field(description="End timestamp")
    attendees: list[str] = Field(default_factory=list, description="Attendee names")

    def to_record(self) -> Record:
        """Convert to an ``Event`` record value."""
        return Record(
            tag="Event",
            fields={
                "id": self.id,
                "subject": self.subject,
                "start": self.start,
                "end": self.end,
                "attendees": make_list(list(self.attendees)),
            },
        )


class Calendar:
    """Ordered in-memory event store.

    ``createEvent`` is the only mutation; it is idempotent per (subject, start),
    so re-executing a graph does not duplicate events.
    """

    def __init__(self, events: list[CalendarEvent] | None = None) -> None:
        """Initialize the calendar.

        Args:
            events: Initial events.
        """
        self.events: list[CalendarEvent] = list(events or [])

    @classmethod
    def from_json(cls, text: str) -> "Calendar":
        """Load a calendar from a JSON array of event objects.

        Raises:
            ConfigError: If the JSON does not describe events.
        """
        try:
            raw = json.loads(text)
            if not isinstance(raw, list):
                raise ValueError("expected a JSON array of events")
            events = [CalendarEvent.model_validate(item) for item in raw]
        except (ValueError, ValidationError) as exc:
            raise ConfigError(f"invalid calendar fixture: {exc}") from exc
        return cls(events)

    @classmethod
    def load(cls, path: Path | None = None) -> "Calendar":
        """Load a calendar file, or the bundled fixture when ``path`` is None."""
        if path is None:
            text = files("dataflow_responder.data").joinpath("calendar.json").read_text("utf-8")
        else:
            text = path.read_text("utf-8")
        calendar = cls.from_json(text)
        logger.debug("loaded %d calendar events", len(calendar.events))
        return calendar

    def copy(self) -> "Calendar":
        """Snapshot that later ``createEvent`` calls on either side do not share."""
        return Calendar([event.model_copy(deep=True) for event in self.events])

    def on_date(self, day: date) -> list[CalendarEvent]:
        """Return events starting on ``day``, ordered by start then id."""
        found = [event for event in self.events if event.start.date() == day]
        return sorted(found, key=lambda event: (event.start, event.id))

    def add(self, event: CalendarEvent) -> CalendarEvent:
        """Insert an event unless one with the same id exists; return the stored event."""
        for existing in self.events:
            if existing.id == event.id:
                return existing
        self.events.append(event)
        return event


def clock_time(moment: datetime | time) -> str:
    """Render a time on the 12-hour clock: ``10 AM`` or ``10:30 AM``."""
    hour = moment.hour % 12 or 12
    suffix = "AM" if moment.hour < 12 else "PM"
    if moment.minute:
        return f"{hour}:{moment.minute:02d} {suffix}"
    return f"{hour} {suffix}"


def month_day(day: date) -> str:
    """Render ``March 15`` style dates."""
    return f"{day.strftime('%B')} {day.day}"


def time_range(start: datetime, end: datetime) -> str:
    """Render an interval: ``10 - 11 AM`` within one half-day, else ``11 AM - 12 PM``."""
    if (start.hour < 12) == (end.hour < 12):
        left = clock_time(start).rsplit(" ", 1)[0]
        return f"{left} - {clock_time(end)}"
    return f"{clock_time(start)} - {clock_time(end)}"


def number_word(n: int) -> str | None:
    """English word for 1..12, else None."""
    return _NUMBER_WORDS[n - 1] if 1 <= n <= len(_NUMBER_WORDS) else None


def calendar_registry(calendar: Calendar | None = None) -> FunctionRegistry:
    """Build the calendar function pack bound to ``calendar``.

    Args:
        calendar: Event store; the bundled fixture is loaded when omitted.

    Returns:
        A registry with date, list, event and rendering helpers.
    """
    store = calendar if calendar is not None else Calendar.load()
    registry = FunctionRegistry()

    @registry.register("today", returns="Date")
    def today(ctx: ExecutionContext) -> date:
        return ctx.now.date()

    @registry.register("tomorrow", returns="Date")
    def tomorrow(ctx: ExecutionContext) -> date:
        return ctx.now.date() + timedelta(days=1)

    @registry.register("addDays", "date:Date", "days:Integer", returns="Date")
    def add_days(ctx: ExecutionContext, day: date, days: int) -> date:
        return day + timedelta(days=days)

    @registry.register("findEventsOnDate", "date:Date", returns="List")
    def find_events_on_date(ctx: ExecutionContext, day: date) -> list[Record]:
        return [event.to_record() for event in store.on_date(day)]

    @registry.register("nonEmpty", "items:List", returns="Boolean")
    def non_empty(ctx: ExecutionContext, items: list[Any]) -> bool:
        return len(items) > 0

    @registry.register("size", "items:List", returns="Integer")
    def size(ctx: ExecutionContext, items: list[Any]) -> int:
        return len(items)

    @registry.register("first", "items:List")
    def first(ctx: ExecutionContext, items: list[Any]) -> Any:
        if not items:
            raise ValueError("first of an empty list")
        return items[0]

    @registry.register("last", "items:List")
    def last(ctx: ExecutionContext, items: list[Any]) -> Any:
        if not items:
            raise ValueError("last of an empty list")
        return items[-1]

    @registry.register("rest", "items:List", returns="List")
    def rest(ctx: ExecutionContext, items: list[Any]) -> list[Any]:
        return list(items[1:])

    @registry.register("identity", "value")
    def identity(ctx: ExecutionContext, value: Any) -> Any:
        return value

    @registry.register("eventSubject", "event:Event", returns="Text")
    def event_subject(ctx: ExecutionContext, event: Record) -> str:
        return str(event.get("subject"))

    @registry.register("eventStart", "event:Event", returns="DateTime")
    def event_start(ctx: ExecutionContext, event: Record) -> datetime:
        return event.get("start")  # type: ignore[no-any-return]

    @registry.register("eventEnd", "event:Event", returns="DateTime")
    def event_end(ctx: ExecutionContext, event: Record) -> datetime:
        return event.get("end")  # type: ignore[no-any-return]

    @registry.register("eventAttendees", "event:Event", returns="List")
    def event_attendees(ctx: ExecutionContext, event: Record) -> list[str]:
        return list(event.get("attendees"))

    @registry.register(
        "createEvent", "subject:Text", "date:Date", "hour:Integer", "*attendees:Text",
        returns="Event",
    )  # fmt: skip
    def create_event(
        ctx: ExecutionContext, subject: str, day: date, hour: int, *attendees: str
    ) -> Record:
        if not 0 <= hour < 24:
            raise ValueError(f"hour out of range: {hour}")
        start = datetime.combine(day, time(hour))
        digest = hashlib.sha256(f"{subject}\t{start.isoformat()}".encode()).hexdigest()
        event = CalendarEvent(
            id=f"e-{digest[:8]}",
            subject=subject,
            start=start,
            end=start + timedelta(hours=1),
            attendees=list(attendees),
        )
        return store.add(event).to_record()

    @registry.register("timeRange", "start:DateTime", "end:DateTime", returns="Text")
    def time_range_fn(ctx: ExecutionContext, start: datetime, end: datetime) -> str:
        return time_range(start, end)

    @registry.register("weekday", "d:Date", returns="Text")
    def weekday(ctx: ExecutionContext, day: date) -> str:
        return day.strftime("%A")

    @registry.register("digits", "n:Integer", returns="Text")
    def digits(ctx: ExecutionContext, n: int) -> str:
        return str(n)

    @registry.register("clockTime", "t", returns="Text")
    def clock_time_fn(ctx: ExecutionContext, moment: Any) -> str:
        if not isinstance(moment, datetime | time):
            raise TypeError("clockTime expects a Time or DateTime")
        return clock_time(moment)

    @registry.register("hourOf", "t", returns="Integer")
    def hour_of(ctx: ExecutionContext, moment: Any) -> int:
        if not isinstance(moment, datetime | time):
            raise TypeError("hourOf expects a Time or DateTime")
        return moment.hour % 12 or 12

    @registry.register("sameMeridiem", "a", "b", returns="Boolean")
    def same_meridiem(ctx: ExecutionContext, a: Any, b: Any) -> bool:
        return (a.hour < 12) == (b.hour < 12)  # type: ignore[no-any-return]

    @registry.register("monthDay", "d:Date", returns="Text")
    def month_day_fn(ctx: ExecutionContext, day: date) -> str:
        return month_day(day)

    return registry
