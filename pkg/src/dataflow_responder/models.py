"""Data models for dataflow-responder."""

from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dataflow_responder.errors import ConfigError
from dataflow_responder.lm.prompt import PromptFlags


class Mode(str, Enum):
    """Generation mode."""

    CONSTRAINED = "constrained"
    UNCONSTRAINED = "unconstrained"
    SAMPLE = "sample"


class SearchStrategy(str, Enum):
    """Search used by constrained decoding."""

    BEAM = "beam"
    BEST_FIRST = "best-first"


class LmKind(str, Enum):
    """Scorer backends."""

    UNIFORM = "uniform"
    NGRAM = "ngram"
    REMOTE = "remote"


class LmSpec(BaseModel):
    """One scorer choice: ``uniform``, ``ngram:PATH`` or ``remote:URL``."""

    model_config = ConfigDict(frozen=True)

    kind: LmKind = Field(default=LmKind.UNIFORM, description="Backend")
    target: str | None = Field(default=None, description="Model path or service URL")

    @model_validator(mode="after")
    def _check_target(self) -> Self:
        if self.kind == LmKind.UNIFORM and self.target is not None:
            raise ValueError("the uniform scorer takes no target")
        if self.kind != LmKind.UNIFORM and not self.target:
            raise ValueError(f"the {self.kind.value} scorer needs a target")
        return self

    @classmethod
    def parse(cls, text: str) -> "LmSpec":
        """Parse the ``--lm`` flag.

        Raises:
            ConfigError: On unknown backends or missing targets.
        """
        kind, sep, target = text.partition(":")
        try:
            return cls(kind=LmKind(kind), target=target if sep else None)
        except (ValueError, ValidationError) as exc:
            raise ConfigError(f"invalid --lm value {text!r}: {exc}") from exc

    def __str__(self) -> str:
        return self.kind.value if self.target is None else f"{self.kind.value}:{self.target}"


class GenerateOptions(BaseModel):
    """Decoding parameters for one generation call."""

    model_config = ConfigDict(frozen=True)

    mode: Mode = Field(default=Mode.CONSTRAINED, description="Generation mode")
    search: SearchStrategy | None = Field(
        default=None, description="Constrained search; best-first when unnormalized, else beam"
    )
    beam_size: int = Field(default=5, ge=1, description="Candidates kept and returned (K)")
    max_len: int = Field(default=40, ge=1, description="Maximum tokens per response")
    max_depth: int = Field(default=64, ge=1, description="Expansion and derivation depth bound")
    length_norm: float = Field(default=0.0, ge=0.0, description="Length normalization exponent")
    renormalize: bool = Field(default=True, description="Renormalize after masking")
    seed: int | None = Field(default=None, description="Sampling seed")
    prompt: PromptFlags = Field(default_factory=PromptFlags, description="Prompt parts")
    now: datetime = Field(description="Execution timestamp")

    @model_validator(mode="after")
    def _check_seed(self) -> Self:
        if self.mode == Mode.SAMPLE and self.seed is None:
            raise ValueError("sample mode requires a seed")
        return self

    @property
    def strategy(self) -> SearchStrategy:
        """The search actually run; exact best-first unless scores are length-normalized."""
        if self.search is not None:
            return self.search
        return SearchStrategy.BEST_FIRST if self.length_norm == 0 else SearchStrategy.BEAM


class RunConfig(BaseModel):
    """Validated flags of one CLI run."""

    model_config = ConfigDict(frozen=True)

    options: GenerateOptions = Field(description="Decoding parameters")
    rules: Path | None = Field(default=None, description="Rule file; bundled pack when None")
    graph: Path | None = Field(default=None, description="Graph file")
    dataset: Path | None = Field(default=None, description="Dataset file")
    lm: LmSpec = Field(default_factory=LmSpec, description="Scorer")
    utterance: str | None = Field(default=None, description="User utterance for the prompt")
    out: Path | None = Field(default=None, description="Output path; stdout when None")

    @model_validator(mode="after")
    def _check_inputs(self) -> Self:
        if (self.graph is None) == (self.dataset is None):
            raise ValueError("give exactly one of --graph and --dataset")
        return self

    @classmethod
    def build(cls, **values: Any) -> "RunConfig":
        """Validate flags, converting validation failures to :class:`ConfigError`."""
        try:
            return cls.model_validate(values)
        except ValidationError as exc:
            messages = "; ".join(err["msg"] for err in exc.errors())
            raise ConfigError(messages) from exc


class Candidate(BaseModel):
    """A scored response string."""

    text: str = Field(description="Detokenized response")
    score: float = Field(description="Normalized log-probability (0 for samples)")


class DecodeResult(BaseModel):
    """Ranked candidates of one generation."""

    candidates: list[Candidate] = Field(description="Best first")
    mode: Mode = Field(description="Mode that produced them")
    diagnostics: dict[str, int | float] = Field(default_factory=dict, description="Search stats")

    @model_validator(mode="after")
    def _check_order(self) -> Self:
        scores = [c.score for c in self.candidates]
        if any(a < b for a, b in zip(scores, scores[1:], strict=False)):
            raise ValueError("candidates must be sorted by non-increasing score")
        return self

    @property
    def texts(self) -> list[str]:
        """Candidate strings in rank order."""
        return [c.text for c in self.candidates]

    def rows(self) -> list[dict[str, Any]]:
        """One JSON row per candidate: rank, text, score and grammar size when known."""
        extra: dict[str, Any] = {}
        if self.mode == Mode.CONSTRAINED and "grammar_size" in self.diagnostics:
            extra["grammar_size"] = self.diagnostics["grammar_size"]
        return [
            {"rank": rank, "text": c.text, "score": c.score, **extra}
            for rank, c in enumerate(self.candidates, start=1)
        ]


class DatasetRecord(BaseModel):
    """One dataset line; ``graph`` is a file path or an inline S-expression."""

    id: str | None = Field(default=None, description="Stable example id")
    graph: str = Field(description="Graph path (relative to the dataset) or S-expression")
    utterance: str = Field(default="", description="User turn")
    gold: str = Field(description="Reference response")
    now: datetime | None = Field(default=None, description="Per-example timestamp")

    @property
    def inline(self) -> bool:
        """Whether ``graph`` holds the S-expression itself."""
        return self.graph.lstrip().startswith(("(", "#"))


class PredictionRecord(BaseModel):
    """Candidates produced for one dataset line."""

    id: str | None = Field(default=None, description="Id of the dataset record")
    utterance: str | None = Field(default=None, description="Utterance of the dataset record")
    candidates: list[Candidate] = Field(default_factory=list, description="Best first")


class EvalExample(BaseModel):
    """A dataset record joined with its ranked candidates."""

    graph: str = Field(description="Graph reference")
    gold: str = Field(description="Reference response")
    candidates: list[Candidate] = Field(default_factory=list, description="Best first")

    @model_validator(mode="after")
    def _check_order(self) -> Self:
        scores = [c.score for c in self.candidates]
        if any(a < b for a, b in zip(scores, scores[1:], strict=False)):
            raise ValueError("candidates must be sorted by non-increasing score")
        return self


class ExampleMetrics(BaseModel):
    """Per-example breakdown row."""

    id: str | None = Field(default=None, description="Example id")
    gold: str = Field(description="Normalized reference")
    top1: str = Field(description="Normalized best candidate")
    rouge_l: float = Field(description="ROUGE-L F1 of the best candidate")
    rank: int | None = Field(default=None, description="1-based rank of the first exact match")


class MetricReport(BaseModel):
    """Corpus metrics plus per-example rows; all scores lie in [0, 1]."""

    examples: int = Field(description="Number of examples")
    bleu4: float = Field(ge=0.0, le=1.0, description="Corpus BLEU-4 of best candidates")
    rouge_l: float = Field(ge=0.0, le=1.0, description="Mean ROUGE-L F1")
    recall: dict[str, float] = Field(description="R@k by k, e.g. R@1")
    bertscore: float | None = Field(default=None, description="Not computed")
    bleu_smoothing: dict[str, float | str] = Field(
        default_factory=lambda: {"method": "add-epsilon", "epsilon": 0.1},
        description="Smoothing used for zero n-gram precisions",
    )
    per_example: list[ExampleMetrics] = Field(default_factory=list, description="Breakdown")
