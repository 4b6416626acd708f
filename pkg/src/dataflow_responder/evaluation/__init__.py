"""Datasets, the synthetic calendar corpus and automatic metrics."""

from dataflow_responder.evaluation.dataset import (
    align,
    load_dataset,
    load_predictions,
    record_graph,
    write_jsonl,
)
from dataflow_responder.evaluation.metrics import (
    bleu4,
    evaluate,
    lcs_length,
    normalize,
    recall_at_k,
    rouge_l,
)
from dataflow_responder.evaluation.synthetic import build_examples, make_dataset, split

__all__ = [
    "align",
    "bleu4",
    "build_examples",
    "evaluate",
    "lcs_length",
    "load_dataset",
    "load_predictions",
    "make_dataset",
    "normalize",
    "recall_at_k",
    "record_graph",
    "rouge_l",
    "split",
    "write_jsonl",
]
