"""Seeded synthetic calendar dataset.

Each example pairs a calendar computation with a user utterance and a gold
response. The gold response is drawn from the computation's own grammar by an
annotator that prefers the first-listed production, so it is always truthful
and mostly phrased the canonical way.
"""

import logging
import random
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path

from dataflow_responder.dataflow.calendar import Calendar, clock_time, month_day
from dataflow_responder.dataflow.sexpr import parse_graph
from dataflow_responder.decoding.pipeline import prepare
from dataflow_responder.errors import ConfigError
from dataflow_responder.evaluation.dataset import write_jsonl
from dataflow_responder.grammar.qcfg import Chooser, Nonterminal, Production
from dataflow_responder.models import DatasetRecord, GenerateOptions
from dataflow_responder.transduction.rules import RuleSet
from dataflow_responder.transduction.transducer import load_rules

logger = logging.getLogger(__name__)

DEFAULT_NOW = datetime(2022, 3, 14, 9, 0)
DEFAULT_SIZE = 300
TEST_FRACTION = 0.3
CANONICAL_PROBABILITY = 0.85

_SUBJECTS = (
    "Coffee", "Gym", "Code Review", "Project Kickoff", "Dentist",
    "Team Lunch", "Yoga", "Planning", "Book Club", "Piano Lesson",
)  # fmt: skip
_PEOPLE = ("Alice", "Bob", "Carol", "Dave", "Erin", "Grace")

_UTTERANCES = {
    "any": (
        "Do I have any meetings {when} ?",
        "Am I busy {when} ?",
        "Is there anything on my calendar {when} ?",
    ),
    "list": ("What's on my calendar {when} ?", "Show me my events {when} ."),
    "count": ("How many meetings do I have {when} ?", "How many events are there {when} ?"),
    "first_start": (
        "When does my first meeting {when} start ?",
        "What time is my first event {when} ?",
    ),
    "attendees": (
        "Who is coming to my first meeting {when} ?",
        "Who will be at my first event {when} ?",
    ),
    "create": (
        "Schedule {subject} {when} at {clock}{with_} .",
        "Put {subject} on my calendar {when} at {clock}{with_} .",
    ),
}
KINDS = tuple(_UTTERANCES)


@dataclass(frozen=True)
class _Day:
    expr: str
    phrase: str
    value: date


def _days(now: datetime) -> list[_Day]:
    today = now.date()
    days = [
        _Day("(today)", "today", today),
        _Day("(tomorrow)", "tomorrow", today + timedelta(days=1)),
    ]
    for offset in range(2, 7):
        value = today + timedelta(days=offset)
        days.append(
            _Day(f"(addDays (today) (Number {offset}))", f"on {value.strftime('%A')}", value)
        )
        days.append(_Day(f'(Date "{value.isoformat()}")', f"on {month_day(value)}", value))
    return days


def canonical_chooser(rng: random.Random, probability: float = CANONICAL_PROBABILITY) -> Chooser:
    """Pick the first production with ``probability``, otherwise another one uniformly."""

    def choose(_: Nonterminal, options: Sequence[Production]) -> Production:
        if len(options) == 1 or rng.random() < probability:
            return options[0]
        return options[1 + rng.randrange(len(options) - 1)]

    return choose


def _computation(
    kind: str, rng: random.Random, days: list[_Day], calendar: Calendar
) -> tuple[str, str]:
    busy = [d for d in days if calendar.on_date(d.value)]
    day = rng.choice(busy if kind in ("first_start", "attendees") else days)
    template = rng.choice(_UTTERANCES[kind])
    found = f"(findEventsOnDate {day.expr})"
    if kind == "any":
        return f"(nonEmpty {found})", template.format(when=day.phrase)
    if kind == "list":
        return found, template.format(when=day.phrase)
    if kind == "count":
        return f"(size {found})", template.format(when=day.phrase)
    if kind == "first_start":
        return f"(eventStart (first {found}))", template.format(when=day.phrase)
    if kind == "attendees":
        return f"(eventAttendees (first {found}))", template.format(when=day.phrase)
    subject = rng.choice(_SUBJECTS)
    hour = rng.randrange(8, 18)
    people = sorted(rng.sample(_PEOPLE, rng.randrange(0, 3)))
    args = "".join(f' (Text "{p}")' for p in people)
    with_ = " with " + " and ".join(people) if people else ""
    utterance = template.format(
        subject=subject,
        when=day.phrase,
        clock=clock_time(datetime(2000, 1, 1, hour)),
        with_=with_,
    )
    return f'(createEvent (Text "{subject}") {day.expr} (Number {hour}){args})', utterance


def build_examples(
    n: int = DEFAULT_SIZE,
    seed: int = 0,
    now: datetime = DEFAULT_NOW,
    ruleset: RuleSet | None = None,
    calendar: Calendar | None = None,
) -> list[DatasetRecord]:
    """Generate ``n`` examples with inline graphs.

    Args:
        n: Number of examples.
        seed: Seed of the single random stream behind kinds, utterances and golds.
        now: Timestamp every example executes at.
        ruleset: Rules the gold responses are drawn from; the bundled pack by default.
        calendar: Calendar the computations run against; the bundled fixture by default.

    Returns:
        The examples, ids ``syn-0000`` onwards.
    """
    if n < 1:
        raise ConfigError("dataset size must be positive")
    rng = random.Random(seed)
    rules = ruleset or load_rules()
    store = calendar or Calendar.load()
    options = GenerateOptions(now=now)
    days = _days(now)
    chooser = canonical_chooser(rng)
    records = []
    for index in range(n):
        kind = KINDS[rng.randrange(len(KINDS))]
        text, utterance = _computation(kind, rng, days, store)
        prepared = prepare(parse_graph(text), rules, options, store)
        gold = prepared.grammar.derive(chooser, options.max_depth).text()
        records.append(
            DatasetRecord(
                id=f"syn-{index:04d}", graph=text, utterance=utterance, gold=gold, now=now
            )
        )
    logger.info("built %d synthetic examples with seed %d", n, seed)
    return records


def split(
    records: Sequence[DatasetRecord], seed: int = 0, test_fraction: float = TEST_FRACTION
) -> tuple[list[DatasetRecord], list[DatasetRecord]]:
    """Shuffle with ``seed`` and split into train and test, keeping id order inside each."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test fraction must lie strictly between 0 and 1")
    order = list(range(len(records)))
    random.Random(seed).shuffle(order)
    cut = round(len(records) * test_fraction)
    test_ids = set(order[:cut])
    train = [r for i, r in enumerate(records) if i not in test_ids]
    test = [r for i, r in enumerate(records) if i in test_ids]
    return train, test


def make_dataset(
    out_dir: Path,
    n: int = DEFAULT_SIZE,
    seed: int = 0,
    test_fraction: float = TEST_FRACTION,
    now: datetime = DEFAULT_NOW,
    ruleset: RuleSet | None = None,
) -> tuple[Path, Path]:
    """Write ``train.jsonl`` and ``test.jsonl`` under ``out_dir``.

    Returns:
        Paths of the train and test files.
    """
    records = build_examples(n, seed, now, ruleset)
    train, test = split(records, seed, test_fraction)
    train_path = out_dir / "train.jsonl"
    test_path = out_dir / "test.jsonl"
    write_jsonl(train_path, train)
    write_jsonl(test_path, test)
    logger.info("wrote %d train and %d test examples to %s", len(train), len(test), out_dir)
    return train_path, test_path
