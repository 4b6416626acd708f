"""CLI interface for dataflow-responder."""

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from datetime import datetime
from pathlib import Path
from typing import Annotated, Any

import typer
from rich.console import Console
from rich.logging import RichHandler

from dataflow_responder import __version__
from dataflow_responder.errors import ConfigError, ResponderError
from dataflow_responder.lm.scorers import LmScorer
from dataflow_responder.lm.tokenizer import Tokenizer
from dataflow_responder.models import (
    LmKind,
    LmSpec,
    Mode,
    PredictionRecord,
    RunConfig,
    SearchStrategy,
)
from dataflow_responder.settings import EngineSettings, load_settings

app = typer.Typer(
    name="dataflow-responder",
    help="Generate truthful responses from dataflow computations.",
    add_completion=True,
    rich_markup_mode="rich",
)
console = Console()
err_console = Console(stderr=True)
logger = logging.getLogger(__name__)

_VERBOSITY = {1: logging.INFO, 2: logging.DEBUG}


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        console.print(
            f"[bold blue]dataflow-responder[/bold blue] version [green]{__version__}[/green]"
        )
        raise typer.Exit()


def _configure_logging(level: int | str) -> None:
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False, show_time=False)],
        force=True,
    )


@contextmanager
def _errors() -> Iterator[None]:
    """Report engine errors on stderr and exit with their code."""
    try:
        yield
    except ResponderError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        raise typer.Exit(code=exc.exit_code) from exc


def _settings(ctx: typer.Context, **overrides: Any) -> EngineSettings:
    config: Path | None = (ctx.obj or {}).get("config")
    return load_settings(config, **overrides)


def _emit(text: str, out: Path | None) -> None:
    """Write data to ``out`` or stdout."""
    if out is None:
        typer.echo(text, nl=False)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info("wrote %s", out)


def _now(text: str) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError as exc:
        raise ConfigError(f"--now must be an ISO-8601 timestamp, got {text!r}") from exc


@app.callback(invoke_without_command=True)
def main(
    ctx: typer.Context,
    version: Annotated[
        bool | None,
        typer.Option(
            "--version",
            "-V",
            help="Show version and exit.",
            callback=version_callback,
            is_eager=True,
        ),
    ] = None,
    verbose: Annotated[
        int,
        typer.Option("--verbose", "-v", count=True, help="More logging on stderr (-v, -vv)."),
    ] = 0,
    config: Annotated[
        Path | None,
        typer.Option(
            "--config",
            help="YAML file with engine settings.",
            exists=True,
            dir_okay=False,
            resolve_path=True,
        ),
    ] = None,
) -> None:
    """dataflow-responder: transduce computations into grammars and decode responses."""
    ctx.obj = {"config": config}
    level: int | str = _VERBOSITY.get(min(verbose, 2), logging.WARNING)
    if verbose == 0:
        try:
            level = load_settings(config).log_level.upper()
        except ConfigError as exc:
            _configure_logging(logging.WARNING)
            logger.error("ConfigError: %s", exc)
            raise typer.Exit(code=exc.exit_code) from exc
    _configure_logging(level)
    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())


GraphOption = Annotated[
    Path | None,
    typer.Option("--graph", "-g", help="Graph file (S-expression).", exists=True, dir_okay=False),
]
DatasetOption = Annotated[
    Path | None,
    typer.Option("--dataset", "-d", help="Dataset JSONL.", exists=True, dir_okay=False),
]
RulesOption = Annotated[
    Path | None,
    typer.Option("--rules", "-r", help="Rule file; the bundled calendar pack by default.",
                 exists=True, dir_okay=False),
]  # fmt: skip
CalendarOption = Annotated[
    Path | None,
    typer.Option("--calendar", help="Calendar JSON; the bundled fixture by default.",
                 exists=True, dir_okay=False),
]  # fmt: skip
NowOption = Annotated[str, typer.Option("--now", help="Execution timestamp, ISO-8601.")]
OutOption = Annotated[
    Path | None, typer.Option("--out", "-o", help="Output file; stdout by default.")
]
MaxDepthOption = Annotated[
    int | None, typer.Option("--max-depth", help="Expansion and derivation depth bound.")
]


@app.command()
def transduce(
    ctx: typer.Context,
    graph: Annotated[
        Path,
        typer.Option("--graph", "-g", help="Graph file (S-expression).",
                     exists=True, dir_okay=False),
    ],  # fmt: skip
    now: NowOption,
    rules: RulesOption = None,
    calendar: CalendarOption = None,
    max_depth: MaxDepthOption = None,
    out: OutOption = None,
) -> None:
    """Execute a graph and print the grammar its rules produce, as JSON."""
    from dataflow_responder.dataflow.calendar import Calendar
    from dataflow_responder.dataflow.sexpr import parse_graph
    from dataflow_responder.decoding.pipeline import prepare
    from dataflow_responder.models import GenerateOptions
    from dataflow_responder.transduction.transducer import load_rules

    with _errors():
        settings = _settings(ctx, max_depth=max_depth)
        options = GenerateOptions(now=_now(now), max_depth=settings.max_depth)
        prepared = prepare(
            parse_graph(graph.read_text(encoding="utf-8")),
            load_rules(rules),
            options,
            Calendar.load(calendar) if calendar else None,
        )
        _emit(prepared.grammar.to_json() + "\n", out)


def _scorer(
    spec: LmSpec, settings: EngineSettings, rules: Path | None, vocab: Path | None
) -> tuple[LmScorer, Tokenizer]:
    """Build the scorer named by ``--lm`` and the tokenizer it scores."""
    from dataflow_responder.decoding.pipeline import rule_tokenizer
    from dataflow_responder.lm.ngram import NgramModel, NgramScorer
    from dataflow_responder.lm.remote import RemoteScorer
    from dataflow_responder.lm.scorers import UniformScorer
    from dataflow_responder.transduction.transducer import load_rules

    if spec.kind == LmKind.NGRAM:
        assert spec.target is not None
        model = NgramModel.load(Path(spec.target))
        scorer = NgramScorer(model, settings.trigger_weight, settings.trigger_clip)
        return scorer, model.tokenizer
    tokenizer = NgramModel.load(vocab).tokenizer if vocab else rule_tokenizer(load_rules(rules))
    if spec.kind == LmKind.REMOTE:
        assert spec.target is not None
        remote = RemoteScorer(spec.target, tokenizer, timeout=settings.remote_timeout)
        return remote, tokenizer
    return UniformScorer(tokenizer.size), tokenizer


def _generate(
    ctx: typer.Context,
    values: dict[str, Any],
    settings_overrides: dict[str, Any],
    calendar: Path | None,
    vocab: Path | None,
) -> None:
    from dataflow_responder.dataflow.calendar import Calendar
    from dataflow_responder.dataflow.sexpr import parse_graph
    from dataflow_responder.decoding.pipeline import generate as run
    from dataflow_responder.evaluation.dataset import load_dataset, record_graph, write_jsonl
    from dataflow_responder.lm.prompt import PromptFlags
    from dataflow_responder.transduction.transducer import load_rules

    settings = _settings(ctx, **settings_overrides)
    prompt_parts = values.pop("prompt_parts")
    options = {
        "mode": values.pop("mode"),
        "search": values.pop("search"),
        "beam_size": settings.beam_size,
        "max_len": settings.max_len,
        "max_depth": settings.max_depth,
        "length_norm": settings.length_norm,
        "renormalize": settings.renormalize,
        "seed": values.pop("seed"),
        "prompt": PromptFlags.parse(prompt_parts) if prompt_parts else PromptFlags(),
        "now": _now(values.pop("now")),
    }
    config = RunConfig.build(options=options, lm=LmSpec.parse(values.pop("lm")), **values)
    ruleset = load_rules(config.rules)
    store = Calendar.load(calendar) if calendar else Calendar.load()
    scorer, tokenizer = _scorer(config.lm, settings, config.rules, vocab)

    try:
        if config.graph is not None:
            graph = parse_graph(config.graph.read_text(encoding="utf-8"))
            result = run(
                graph,
                ruleset,
                scorer,
                tokenizer,
                config.options,
                calendar=store,
                utterance=config.utterance,
            )
            text = write_jsonl(config.out, result.rows())
            if config.out is None:
                _emit(text, None)
            return

        assert config.dataset is not None
        predictions = []
        for record in load_dataset(config.dataset):
            options_now = config.options.model_copy(
                update={"now": record.now or config.options.now}
            )
            result = run(
                record_graph(record, config.dataset.parent),
                ruleset,
                scorer,
                tokenizer,
                options_now,
                calendar=store,
                utterance=record.utterance,
            )
            predictions.append(
                PredictionRecord(
                    id=record.id, utterance=record.utterance, candidates=result.candidates
                )
            )
        logger.info("generated candidates for %d examples", len(predictions))
        text = write_jsonl(config.out, predictions)
        if config.out is None:
            _emit(text, None)
    finally:
        close = getattr(scorer, "close", None)
        if close is not None:
            close()


@app.command()
def generate(
    ctx: typer.Context,
    now: NowOption,
    graph: GraphOption = None,
    dataset: DatasetOption = None,
    rules: RulesOption = None,
    lm: Annotated[
        str, typer.Option("--lm", help="Scorer: uniform, ngram:PATH or remote:URL.")
    ] = "uniform",
    vocab: Annotated[
        Path | None,
        typer.Option("--vocab", help="n-gram model whose vocabulary a remote scorer uses.",
                     exists=True, dir_okay=False),
    ] = None,  # fmt: skip
    mode: Annotated[Mode, typer.Option("--mode", "-m", help="Generation mode.")] = (
        Mode.CONSTRAINED
    ),
    search: Annotated[
        SearchStrategy | None,
        typer.Option("--search", help="Constrained search; best-first unless length-normalized."),
    ] = None,
    beam: Annotated[int | None, typer.Option("--beam", "-k", help="Beam size K.")] = None,
    max_len: Annotated[
        int | None, typer.Option("--max-len", help="Maximum tokens per response.")
    ] = None,
    max_depth: MaxDepthOption = None,
    length_norm: Annotated[
        float | None, typer.Option("--length-norm", help="Length normalization exponent.")
    ] = None,
    renormalize: Annotated[
        bool | None,
        typer.Option("--renormalize/--no-renormalize", help="Renormalize after masking."),
    ] = None,
    seed: Annotated[int | None, typer.Option("--seed", help="Sampling seed.")] = None,
    prompt_parts: Annotated[
        str | None,
        typer.Option("--prompt-parts", help="Comma list of utterance, computation, result."),
    ] = None,
    utterance: Annotated[
        str | None, typer.Option("--utterance", "-u", help="User utterance for the prompt.")
    ] = None,
    calendar: CalendarOption = None,
    out: OutOption = None,
) -> None:
    """Generate ranked responses for a graph or every example of a dataset (JSON lines)."""
    with _errors():
        _generate(
            ctx,
            {
                "mode": mode,
                "search": search,
                "seed": seed,
                "prompt_parts": prompt_parts,
                "now": now,
                "lm": lm,
                "rules": rules,
                "graph": graph,
                "dataset": dataset,
                "utterance": utterance,
                "out": out,
            },
            {
                "beam_size": beam,
                "max_len": max_len,
                "max_depth": max_depth,
                "length_norm": length_norm,
                "renormalize": renormalize,
            },
            calendar,
            vocab,
        )


@app.command()
def sample(
    ctx: typer.Context,
    now: NowOption,
    seed: Annotated[int, typer.Option("--seed", help="Sampling seed.")],
    graph: GraphOption = None,
    dataset: DatasetOption = None,
    rules: RulesOption = None,
    beam: Annotated[int | None, typer.Option("--beam", "-k", help="Number of samples.")] = None,
    max_depth: MaxDepthOption = None,
    calendar: CalendarOption = None,
    out: OutOption = None,
) -> None:
    """Draw seeded random responses from each graph's grammar."""
    with _errors():
        _generate(
            ctx,
            {
                "mode": Mode.SAMPLE,
                "search": None,
                "seed": seed,
                "prompt_parts": None,
                "now": now,
                "lm": "uniform",
                "rules": rules,
                "graph": graph,
                "dataset": dataset,
                "utterance": None,
                "out": out,
            },
            {"beam_size": beam, "max_depth": max_depth},
            calendar,
            None,
        )


@app.command()
def evaluate(
    dataset: Annotated[
        Path, typer.Option("--dataset", "-d", help="Dataset JSONL.", exists=True, dir_okay=False)
    ],
    predictions: Annotated[
        Path,
        typer.Option("--predictions", "-p", help="Predictions JSONL from generate.",
                     exists=True, dir_okay=False),
    ],  # fmt: skip
    k: Annotated[
        list[int] | None, typer.Option("--k", help="Recall cutoffs (repeatable).")
    ] = None,
    out: OutOption = None,
) -> None:
    """Score predictions against a dataset: BLEU-4, ROUGE-L and R@k."""
    from dataflow_responder.evaluation.dataset import align, load_dataset, load_predictions
    from dataflow_responder.evaluation.metrics import DEFAULT_KS
    from dataflow_responder.evaluation.metrics import evaluate as score

    with _errors():
        records = load_dataset(dataset)
        examples = align(records, load_predictions(predictions))
        cutoffs = k or list(DEFAULT_KS)
        if any(c < 1 for c in cutoffs):
            raise ConfigError("--k values must be at least 1")
        report = score(examples, cutoffs, [r.id for r in records])
        _emit(report.model_dump_json(indent=2) + "\n", out)


@app.command("train-lm")
def train_lm(
    ctx: typer.Context,
    corpus: Annotated[
        Path,
        typer.Option("--corpus", "-c", help="Dataset JSONL, or text with one response per line.",
                     exists=True, dir_okay=False),
    ],  # fmt: skip
    out: Annotated[Path, typer.Option("--out", "-o", help="Model file to write.")],
    order: Annotated[int | None, typer.Option("--order", "-n", help="n-gram order.")] = None,
    k: Annotated[float | None, typer.Option("--k", help="Add-k smoothing constant.")] = None,
    prompt_parts: Annotated[
        str | None,
        typer.Option("--prompt-parts", help="Prompt parts to learn triggers from (datasets)."),
    ] = None,
    now: Annotated[
        str | None, typer.Option("--now", help="Timestamp for examples without one.")
    ] = None,
    calendar: CalendarOption = None,
    no_triggers: Annotated[
        bool, typer.Option("--no-triggers", help="Skip prompt trigger statistics.")
    ] = False,
) -> None:
    """Train an add-k n-gram model on gold responses."""
    from dataflow_responder.dataflow.calendar import Calendar, calendar_registry
    from dataflow_responder.dataflow.graph import execute
    from dataflow_responder.evaluation.dataset import load_dataset, record_graph
    from dataflow_responder.lm.ngram import train_on_texts
    from dataflow_responder.lm.prompt import PromptFlags, build_prompt

    with _errors():
        settings = _settings(ctx, ngram_order=order, ngram_k=k)
        prompts: list[str] | None = None
        if corpus.suffix == ".jsonl":
            records = load_dataset(corpus)
            responses = [r.gold for r in records]
            if not no_triggers:
                flags = PromptFlags.parse(prompt_parts) if prompt_parts else PromptFlags()
                base = Calendar.load(calendar) if calendar else Calendar.load()
                prompts = []
                for record in records:
                    when = record.now or (_now(now) if now else None)
                    if when is None:
                        raise ConfigError(f"example {record.id} has no timestamp; pass --now")
                    graph = record_graph(record, corpus.parent)
                    executed = execute(graph, calendar_registry(base.copy()), when)
                    prompts.append(build_prompt(executed, flags, record.utterance).text)
        else:
            lines = corpus.read_text(encoding="utf-8").splitlines()
            responses = [line for line in lines if line.strip()]
        model = train_on_texts(responses, settings.ngram_order, settings.ngram_k, prompts)
        out.parent.mkdir(parents=True, exist_ok=True)
        model.save(out)


@app.command("make-dataset")
def make_dataset(
    out: Annotated[Path, typer.Option("--out", "-o", help="Directory for train/test JSONL.")],
    n: Annotated[int, typer.Option("--n", help="Number of examples.")] = 300,
    seed: Annotated[int, typer.Option("--seed", help="Random seed.")] = 0,
    test_fraction: Annotated[
        float, typer.Option("--test-fraction", help="Share of examples held out.")
    ] = 0.3,
    now: Annotated[
        str, typer.Option("--now", help="Timestamp of every example.")
    ] = "2022-03-14T09:00",
    rules: RulesOption = None,
) -> None:
    """Write a seeded synthetic calendar dataset."""
    from dataflow_responder.evaluation.synthetic import make_dataset as build
    from dataflow_responder.transduction.transducer import load_rules

    with _errors():
        train, test = build(out, n, seed, test_fraction, _now(now), load_rules(rules))
        err_console.print(f"[green]✓[/green] Wrote [bold]{train}[/bold] and [bold]{test}[/bold]")


@app.command("serve-mock")
def serve_mock(
    ctx: typer.Context,
    lm: Annotated[
        str, typer.Option("--lm", help="Scorer to serve: uniform or ngram:PATH.")
    ] = "uniform",
    script: Annotated[
        str | None, typer.Option("--script", help="Serve a scorer that prefers this sentence.")
    ] = None,
    rules: RulesOption = None,
    host: Annotated[str, typer.Option("--host", help="Bind address.")] = "127.0.0.1",
    port: Annotated[int, typer.Option("--port", help="Bind port.")] = 8765,
) -> None:
    """Serve a local scorer over the remote scoring protocol."""
    import uvicorn

    from dataflow_responder.lm.mock_server import create_mock_app
    from dataflow_responder.lm.scorers import ScriptedScorer

    with _errors():
        spec = LmSpec.parse(lm)
        if spec.kind == LmKind.REMOTE:
            raise ConfigError("serve-mock cannot serve a remote scorer")
        scorer, tokenizer = _scorer(spec, _settings(ctx), rules, None)
        if script is not None:
            scorer = ScriptedScorer(tokenizer.size, tokenizer.encode(script))
        err_console.print(f"[bold]Serving[/bold] [cyan]{spec}[/cyan] on http://{host}:{port}")
        uvicorn.run(create_mock_app(tokenizer, scorer), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    app()
