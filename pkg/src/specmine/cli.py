"""Command-line interface: the full pipeline plus per-stage subcommands."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import corpus, pipeline
from .config import build_config
from .errors import SpecmineError

log = logging.getLogger(__name__)


def _common_options(func):
    options = [
        click.option("--config", "config_file", type=click.Path(exists=True), default=None, help="Config file (key = value lines)."),
        click.option("--out", "output_dir", default=None, help="Artifact output directory."),
        click.option("--model", default=None, help="Model name."),
        click.option("--temperature", type=float, default=None, help="Sampling temperature (default 0.8)."),
        click.option("--retries", "retry_budget", type=int, default=None, help="Content repair retry budget (default 3)."),
        click.option("--window", "window_size", type=int, default=None, help="Sliding window size in lines (default 60)."),
        click.option("--overlap", type=int, default=None, help="Window overlap in lines (default 10)."),
        click.option("--block-size", "block_size", type=int, default=None, help="Boundary search block size (default 20)."),
        click.option("--cassette", "cassette_path", type=click.Path(), default=None, help="Cassette file (JSON Lines)."),
        click.option("--cassette-mode", "cassette_mode", type=click.Choice(["record", "replay", "passthrough"]), default=None),
        click.option("--base-url", "base_url", default=None, help="OpenAI-compatible endpoint base URL."),
        click.option("--prompt-dir", "prompt_dir", type=click.Path(exists=True), default=None, help="Prompt template override directory."),
        click.option("-v", "--verbose", is_flag=True, help="Verbose logging."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _make_config(config_file, verbose, **overrides):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return build_config(config_file, **overrides)


@click.group()
def main() -> None:
    """Extract entities, rules, and a formal rule grammar from API documents."""


def _fail(exc: SpecmineError) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@main.command()
@click.option("--doc", "doc_path", required=True, type=click.Path(exists=True), help="Input document.")
@_common_options
def run(doc_path, config_file, verbose, **overrides) -> None:
    """Run all five stages and write the artifact bundle."""
    config = _make_config(config_file, verbose, **overrides)
    try:
        out_dir = pipeline.run_pipeline(doc_path, config)
    except SpecmineError as exc:
        _fail(exc)
        return
    click.echo(f"artifact bundle written to {out_dir}")


@main.command()
@click.option("--doc", "doc_path", required=True, type=click.Path(exists=True))
@_common_options
def localize(doc_path, config_file, verbose, **overrides) -> None:
    """Stage 1: accumulate patterns (or reuse patterns.json) and match entities."""
    config = _make_config(config_file, verbose, **overrides)
    try:
        runtime = pipeline.build_runtime(config)
        entities = pipeline.stage_localize(runtime, corpus.ingest(doc_path))
    except SpecmineError as exc:
        _fail(exc)
        return
    click.echo(f"located {len(entities)} entities")


@main.command()
@_common_options
def attributes(config_file, verbose, **overrides) -> None:
    """Stage 2: grow the attribute schema and extract per-entity values."""
    config = _make_config(config_file, verbose, **overrides)
    try:
        runtime = pipeline.build_runtime(config)
        entities = pipeline.load_entities(runtime)
        schema, records = pipeline.stage_attributes(runtime, entities)
    except SpecmineError as exc:
        _fail(exc)
        return
    click.echo(f"schema has {len(schema.attributes)} attributes; {len(records)} records written")


@main.command()
@click.option("--doc", "doc_path", required=True, type=click.Path(exists=True))
@_common_options
def nlrules(doc_path, config_file, verbose, **overrides) -> None:
    """Stage 3: boundary, sentence split, grading, and the logistic judge."""
    config = _make_config(config_file, verbose, **overrides)
    try:
        runtime = pipeline.build_runtime(config)
        entities = pipeline.load_entities(runtime)
        graded = pipeline.stage_nlrules(runtime, corpus.ingest(doc_path), entities)
    except SpecmineError as exc:
        _fail(exc)
        return
    rules = sum(1 for row in graded if row.is_rule)
    click.echo(f"graded {len(graded)} sentences; {rules} classified as rules")


@main.command()
@_common_options
def grammar(config_file, verbose, **overrides) -> None:
    """Stage 4: accumulate sorts and predicates, render grammar.ebnf."""
    config = _make_config(config_file, verbose, **overrides)
    try:
        runtime = pipeline.build_runtime(config)
        entities = pipeline.load_entities(runtime)
        graded = pipeline.load_graded(runtime)
        induced = pipeline.stage_grammar(runtime, graded, entities)
    except SpecmineError as exc:
        _fail(exc)
        return
    click.echo(f"grammar induced: {len(induced.sorts)} sorts, {len(induced.predicates)} predicates")


@main.command()
@_common_options
def formalize(config_file, verbose, **overrides) -> None:
    """Stage 5: emit one DSL statement per rule, validated against the grammar."""
    config = _make_config(config_file, verbose, **overrides)
    try:
        runtime = pipeline.build_runtime(config)
        entities = pipeline.load_entities(runtime)
        graded = pipeline.load_graded(runtime)
        records = pipeline.load_records(runtime)
        induced = pipeline.load_grammar(runtime)
        rows = pipeline.stage_formalize(runtime, graded, entities, records, induced)
    except SpecmineError as exc:
        _fail(exc)
        return
    ok = sum(1 for row in rows if row["parse_ok"])
    click.echo(f"formalized {ok}/{len(rows)} rules")


@main.command(name="eval")
@click.option("--doc", "doc_path", required=True, type=click.Path(exists=True))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True), help="Gold annotation JSON.")
@_common_options
def eval_cmd(doc_path, gold_path, config_file, verbose, **overrides) -> None:
    """Score formal_rules.json against gold annotations."""
    config = _make_config(config_file, verbose, **overrides)
    try:
        runtime = pipeline.build_runtime(config)
        doc = corpus.ingest(doc_path)
        report = pipeline.stage_eval(runtime, doc.id, gold_path)
    except SpecmineError as exc:
        _fail(exc)
        return
    click.echo(pipeline.format_table(report))


if __name__ == "__main__":
    main()
