"""JSON Lines datasets and prediction files."""

import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

from pydantic import BaseModel, ValidationError

from dataflow_responder.dataflow.graph import DataflowGraph
from dataflow_responder.dataflow.sexpr import parse_graph
from dataflow_responder.errors import DatasetError
from dataflow_responder.models import DatasetRecord, EvalExample, PredictionRecord

logger = logging.getLogger(__name__)


def _read_lines[M: BaseModel](path: Path, model: type[M]) -> list[M]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    records: list[M] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(model.model_validate_json(line))
        except ValidationError as exc:
            raise DatasetError(f"{path}:{number}: {exc.errors()[0]['msg']}") from exc
    logger.debug("read %d records from %s", len(records), path)
    return records


def load_dataset(path: Path) -> list[DatasetRecord]:
    """Read dataset records.

    Raises:
        DatasetError: On unreadable files, malformed lines or an empty dataset.
    """
    records = _read_lines(path, DatasetRecord)
    if not records:
        raise DatasetError(f"{path} holds no examples")
    return records


def load_predictions(path: Path) -> list[PredictionRecord]:
    """Read prediction records written by ``generate --dataset``."""
    return _read_lines(path, PredictionRecord)


def write_jsonl(path: Path | None, rows: Iterable[BaseModel | dict[str, object]]) -> str:
    """Serialize rows one per line; write to ``path`` when given and return the text."""
    lines = [
        row.model_dump_json() if isinstance(row, BaseModel) else json.dumps(row, sort_keys=False)
        for row in rows
    ]
    text = "".join(line + "\n" for line in lines)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return text


def record_graph(record: DatasetRecord, base: Path) -> DataflowGraph:
    """Parse the record's graph, inline or from a file relative to ``base``.

    Raises:
        DatasetError: If the graph file cannot be read.
        GraphSyntaxError: If the graph text is malformed.
    """
    if record.inline:
        return parse_graph(record.graph)
    path = base / record.graph
    try:
        return parse_graph(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DatasetError(f"cannot read graph {path}: {exc}") from exc


def align(
    dataset: Sequence[DatasetRecord], predictions: Sequence[PredictionRecord]
) -> list[EvalExample]:
    """Join dataset records with predictions line by line.

    Ids (and utterances, when both sides carry them) must agree.

    Raises:
        DatasetError: On count, id or utterance mismatches.
    """
    if len(dataset) != len(predictions):
        raise DatasetError(
            f"dataset has {len(dataset)} examples but there are {len(predictions)} predictions"
        )
    examples = []
    for line, (record, prediction) in enumerate(zip(dataset, predictions, strict=True), start=1):
        if record.id is not None and prediction.id is not None and record.id != prediction.id:
            raise DatasetError(
                f"line {line}: prediction {prediction.id!r} does not match example {record.id!r}"
            )
        if prediction.utterance is not None and prediction.utterance != record.utterance:
            raise DatasetError(f"line {line}: prediction utterance does not match the example")
        examples.append(
            EvalExample(graph=record.graph, gold=record.gold, candidates=prediction.candidates)
        )
    return examples
