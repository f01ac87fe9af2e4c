"""Operator CLI: ingest, ask, evaluate, serve.

Exit codes are stable: 0 success, 2 usage, 3 empty corpus, 4 query
planning failure, 5 chat backend failure, 6 malformed input, 1 any other
pipeline error.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from chime.config import load_config, make_backend, make_embedder
from chime.errors import (
    BackendError,
    ChimeError,
    EmptyCorpusError,
    IngestError,
    InvalidInputError,
    InvalidQueryError,
    PlanningError,
    StoreError,
)
from chime.evaluator import (
    CorrectnessReport,
    GradedResult,
    correctness,
    grade_pair,
    load_benchmark,
    render_report_text,
)
from chime.ingest import GitHubClient, IngestSpec, load_local
from chime.issues import preprocess
from chime.pipeline import ABLATABLE_STAGES, ask as run_ask
from chime.store import StoredCorpus

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_EMPTY_CONTEXT = 3
EXIT_PLANNING = 4
EXIT_BACKEND = 5
EXIT_BAD_INPUT = 6

_EXIT_BY_ERROR = (
    (EmptyCorpusError, EXIT_EMPTY_CONTEXT),
    (PlanningError, EXIT_PLANNING),
    (BackendError, EXIT_BACKEND),
    ((InvalidInputError, InvalidQueryError, IngestError, StoreError), EXIT_BAD_INPUT),
)


def pipeline_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ChimeError as exc:
            click.echo(f"error: {exc}", err=True)
            for types, code in _EXIT_BY_ERROR:
                if isinstance(exc, types):
                    sys.exit(code)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_BAD_INPUT)

    return wrapper


def config_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="JSON config file."),
        click.option("--store", "store_path", default=None, help="Issue store path."),
        click.option("--script", "backend_script", default=None,
                     help="Scripted chat backend JSON file."),
        click.option("--backend-url", default=None, help="Live chat endpoint base URL."),
        click.option("--model", "backend_model", default=None, help="Chat model id."),
        click.option("--embedding-provider", default=None, help="Embedding provider id."),
        click.option("--threshold", type=float, default=None,
                     help="Similarity threshold in (0, 1)."),
        click.option("--k", type=int, default=None, help="Retrieval depth."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _build_config(config_path, **overrides):
    return load_config(config_path, overrides=overrides)


@click.group()
def cli():
    """Bug-report question answering with response validation."""


@cli.command()
@click.option("--local", "local_path", type=click.Path(), default=None,
              help="Local JSON/JSONL issue file instead of the API.")
@click.option("--repo", default=None, help="owner/name to fetch from the API.")
@click.option("--numbers", default=None, help="Comma-separated issue numbers.")
@click.option("--since", default=None, help="Only issues updated since this ISO timestamp.")
@click.option("--open-only", is_flag=True, help="Fetch open issues only.")
@click.option("--cache-dir", default="cache", help="HTTP fetch cache directory.")
@click.option("--token", envvar="GITHUB_TOKEN", default=None, help="API token.")
@click.option("--page-size", type=int, default=100)
@config_options
@pipeline_errors
def ingest(local_path, repo, numbers, since, open_only, cache_dir, token, page_size,
           config_path, **overrides):
    """Load issues, preprocess them, and insert into the store."""
    config = _build_config(config_path, **overrides)
    if local_path:
        raws, errors = load_local(local_path)
        for error in errors:
            click.echo(f"skipped: {error}", err=True)
    elif repo:
        parsed_numbers = ()
        if numbers:
            try:
                parsed_numbers = tuple(int(n) for n in numbers.split(","))
            except ValueError:
                raise click.BadParameter("numbers must be comma-separated integers")
        spec = IngestSpec(
            repo=repo,
            numbers=parsed_numbers,
            since=since,
            open_only=open_only,
            token=token,
            page_size=page_size,
        )
        raws = GitHubClient(cache_dir=cache_dir).fetch(spec)
    else:
        raise click.UsageError("provide --local or --repo")

    store = StoredCorpus(config.store_path, embedder=make_embedder(config))
    blocks = traces = skipped = 0
    for raw in raws:
        record = preprocess(raw)
        store.insert(record)
        blocks += len(record.code_blocks)
        traces += len(record.stack_traces)
        skipped += record.skipped_lines
    click.echo(f"{len(raws)} issues, {blocks} code blocks, {traces} traces, "
               f"{skipped} skipped lines")


@cli.command()
@click.argument("question")
@click.option("--no-validate", is_flag=True, help="Return the raw draft answer.")
@click.option("--ablate", multiple=True, type=click.Choice(sorted(ABLATABLE_STAGES)),
              help="Disable one pipeline stage (repeatable).")
@click.option("--transcript-out", type=click.Path(), default=None,
              help="Directory to write the run transcript into.")
@config_options
@pipeline_errors
def ask(question, no_validate, ablate, transcript_out, config_path, **overrides):
    """Answer a question over the ingested issues."""
    config = _build_config(config_path, **overrides)
    store = StoredCorpus(config.store_path, embedder=make_embedder(config))
    result = run_ask(
        question,
        store,
        make_backend(config),
        make_embedder(config),
        k=config.k,
        threshold=config.threshold,
        run_validation=not no_validate,
        ablate=tuple(dict.fromkeys(tuple(ablate) + config.ablation_stages())),
    )
    click.echo(result.final)
    out_dir = transcript_out or config.transcript_dir
    if out_dir:
        path = Path(out_dir) / f"{result.transcript_id}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(result.transcript, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )
        click.echo(f"transcript: {path}", err=True)


def _load_baseline(path: str) -> CorrectnessReport:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    overall = data.get("report", data).get("overall")
    if not overall:
        raise InvalidInputError(f"baseline {path} has no overall section")
    return CorrectnessReport(int(overall["correct"]), int(overall["total"]), {})


@cli.command()
@click.option("--benchmark", "benchmark_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for report.json and report.txt.")
@click.option("--baseline", "baseline_path", type=click.Path(), default=None,
              help="Earlier report.json to compute the Improv column against.")
@click.option("--no-validate", is_flag=True, help="Grade raw draft answers.")
@click.option("--ablate", multiple=True, type=click.Choice(sorted(ABLATABLE_STAGES)))
@config_options
@pipeline_errors
def evaluate(benchmark_path, out_dir, baseline_path, no_validate, ablate,
             config_path, **overrides):
    """Run the pipeline over a benchmark and grade the answers."""
    config = _build_config(config_path, **overrides)
    pairs = load_benchmark(benchmark_path)
    store = StoredCorpus(config.store_path, embedder=make_embedder(config))
    llm = make_backend(config)
    embed = make_embedder(config)
    ablate_all = tuple(dict.fromkeys(tuple(ablate) + config.ablation_stages()))

    results: list[GradedResult] = []
    transcripts: dict[str, dict | None] = {}
    for pair in pairs:
        try:
            outcome = run_ask(
                pair.question,
                store,
                llm,
                embed,
                k=config.k,
                threshold=config.threshold,
                run_validation=not no_validate,
                ablate=ablate_all,
            )
        except ChimeError as exc:
            # A single pair's failure counts against correctness but must
            # not sink the run.
            click.echo(f"pair {pair.id}: {type(exc).__name__}: {exc}", err=True)
            results.append(GradedResult(pair.id, "", False, None, "error"))
            transcripts[pair.id] = None
            continue
        results.append(grade_pair(pair, outcome.final, embed, llm, config.threshold))
        transcripts[pair.id] = {
            "transcript_id": outcome.transcript_id,
            "transcript": outcome.transcript,
        }

    baseline = _load_baseline(baseline_path) if baseline_path else None
    report = correctness(results, pairs, baseline)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_json = {
        "report": report.to_dict(),
        "results": [result.to_dict() for result in results],
    }
    (out / "report.json").write_text(
        json.dumps(report_json, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    (out / "report.txt").write_text(render_report_text(report), encoding="utf-8")
    (out / "transcripts.json").write_text(
        json.dumps(transcripts, sort_keys=True, ensure_ascii=False, indent=2) + "\n",
        encoding="utf-8",
    )
    click.echo(f"{report.overall_correct}/{report.overall_total} correct "
               f"({report.overall_percent}%)")


@cli.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--ui-dir", type=click.Path(), default=None,
              help="Static chat UI bundle to serve at /ui.")
@config_options
@pipeline_errors
def serve(host, port, ui_dir, config_path, **overrides):
    """Run the HTTP question-answering service."""
    import uvicorn

    from chime.service import create_app

    config = _build_config(config_path, **overrides)
    app = create_app(config, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main():
    cli(prog_name="chime")


if __name__ == "__main__":
    main()
