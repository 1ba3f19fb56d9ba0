"""Orchestration: run the five stages and persist their artifacts.

Artifacts are the only channel between stages, so every stage can also run
standalone from a prior stage's files:

    patterns.json            target/exclude pattern sets
    entities.json            located entities
    attribute_schema.json    accumulated attribute definitions
    attributes.json          per-entity attribute records
    nl_rules.json            graded sentences (votes, score, is_rule)
    grammar.json             sorts and predicates
    grammar.ebnf             rendered grammar text
    formal_rules.json        DSL statements (dsl=None when unformalized)
    run_manifest.json        config, digests, token totals
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import corpus, dsl, grammar as grammar_mod, localizer, nlrules
from .attributes import AttributeRecord, AttributeSchema, extract_values, grow_schema
from .config import RunConfig, api_key_from_env
from .errors import MissingArtifact
from .evalharness import EvalReport, GoldAnnotation, format_table, score_run
from .formalize import formalize
from .gateway import Cassette, LlmGateway, Transport
from .localizer import Entity, PatternSet, accumulate_patterns, match_entities
from .nlrules import GradedSentence, GradeVote
from .protocol import ChatSession, Protocol, PromptStore

log = logging.getLogger(__name__)

ARTIFACTS = (
    "patterns.json",
    "entities.json",
    "attribute_schema.json",
    "attributes.json",
    "nl_rules.json",
    "grammar.json",
    "grammar.ebnf",
    "formal_rules.json",
    "run_manifest.json",
)


def write_json(path: Path, data: object) -> None:
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def read_json(path: Path) -> object:
    if not path.exists():
        raise MissingArtifact(f"required artifact {path.name} not found in {path.parent}")
    return json.loads(path.read_text(encoding="utf-8"))


@dataclass
class Runtime:
    """Everything a stage needs: config, prompt store, gateway, cassette."""

    config: RunConfig
    protocol: Protocol
    gateway: LlmGateway
    cassette: Cassette
    out_dir: Path

    def session(self) -> ChatSession:
        return ChatSession(gateway=self.gateway, cassette=self.cassette, temperature=self.config.temperature)

    def path(self, name: str) -> Path:
        return self.out_dir / name


def build_runtime(config: RunConfig, transport: Transport | None = None) -> Runtime:
    """Wire up the gateway/cassette; fails fast when live calls lack a credential."""
    store = PromptStore(override_dir=config.prompt_dir)
    gateway = LlmGateway(
        model=config.model,
        base_url=config.base_url,
        api_key=api_key_from_env(),
        transport=transport,
        temperature=config.temperature,
    )
    if config.cassette_mode != "replay":
        gateway.require_credential()
    cassette = Cassette(path=config.cassette_path, mode=config.cassette_mode)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return Runtime(config=config, protocol=Protocol(store), gateway=gateway, cassette=cassette, out_dir=out_dir)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_localize(runtime: Runtime, doc: corpus.Document) -> list[Entity]:
    """Stage 1. Reuses an existing patterns.json (pure re-match) when present."""
    patterns_path = runtime.path("patterns.json")
    if patterns_path.exists():
        log.info("reusing existing %s", patterns_path)
        ps = PatternSet.from_json(read_json(patterns_path))
    else:
        wins = corpus.windows(
            doc,
            runtime.config.window_size,
            runtime.config.overlap,
            max_tokens=runtime.config.max_window_tokens,
        )
        ps = accumulate_patterns(doc, wins, runtime.protocol, runtime.session, budget=runtime.config.retry_budget)
        write_json(patterns_path, ps.to_json())
    entities = match_entities(doc, ps)
    write_json(runtime.path("entities.json"), [entity.to_json() for entity in entities])
    return entities


def load_entities(runtime: Runtime) -> list[Entity]:
    return [Entity.from_json(item) for item in read_json(runtime.path("entities.json"))]


def stage_attributes(runtime: Runtime, entities: list[Entity]) -> tuple[AttributeSchema, list[AttributeRecord]]:
    schema = grow_schema(entities, runtime.protocol, runtime.session, budget=runtime.config.retry_budget)
    records = [
        extract_values(entity, schema, runtime.protocol, runtime.session, budget=runtime.config.retry_budget)
        for entity in entities
    ]
    write_json(runtime.path("attribute_schema.json"), schema.to_json())
    write_json(runtime.path("attributes.json"), [record.to_json() for record in records])
    return schema, records


def load_records(runtime: Runtime) -> dict[str, AttributeRecord]:
    rows = read_json(runtime.path("attributes.json"))
    return {row["entity_id"]: AttributeRecord(entity_id=row["entity_id"], values=row["values"]) for row in rows}


def stage_nlrules(runtime: Runtime, doc: corpus.Document, entities: list[Entity]) -> list[GradedSentence]:
    graded: list[GradedSentence] = []
    for entity in entities:
        graded.extend(
            nlrules.extract_rules_for_entity(
                entity,
                doc,
                runtime.protocol,
                runtime.session,
                block_size=runtime.config.block_size,
                fallback_lines=runtime.config.fallback_lines,
                budget=runtime.config.retry_budget,
            )
        )
    write_json(runtime.path("nl_rules.json"), [row.to_json() for row in graded])
    return graded


def load_graded(runtime: Runtime) -> list[GradedSentence]:
    rows = read_json(runtime.path("nl_rules.json"))
    graded = []
    for row in rows:
        votes = tuple(GradeVote(**vote) for vote in row["votes"])
        graded.append(
            GradedSentence(
                entity_id=row["entity_id"],
                sentence=row["sentence"],
                votes=votes,  # type: ignore[arg-type]
                score=row["score"],
                is_rule=row["is_rule"],
            )
        )
    return graded


def stage_grammar(
    runtime: Runtime, graded: list[GradedSentence], entities: list[Entity]
) -> dsl.InducedGrammar:
    rules = [row for row in graded if row.is_rule]
    by_id = {entity.id: entity for entity in entities}
    sorts = grammar_mod.accumulate_sorts(rules, by_id, runtime.protocol, runtime.session, budget=runtime.config.retry_budget)
    predicates = grammar_mod.accumulate_predicates(
        rules, sorts, by_id, runtime.protocol, runtime.session, budget=runtime.config.retry_budget
    )
    induced = dsl.instantiate(sorts, predicates)
    write_json(runtime.path("grammar.json"), grammar_mod.grammar_to_json(sorts, predicates))
    runtime.path("grammar.ebnf").write_text(induced.rendered_ebnf, encoding="utf-8")
    return induced


def load_grammar(runtime: Runtime) -> dsl.InducedGrammar:
    sorts, predicates = grammar_mod.grammar_from_json(read_json(runtime.path("grammar.json")))
    return dsl.instantiate(sorts, predicates)


def stage_formalize(
    runtime: Runtime,
    graded: list[GradedSentence],
    entities: list[Entity],
    records: dict[str, AttributeRecord],
    induced: dsl.InducedGrammar,
) -> list[dict]:
    by_id = {entity.id: entity for entity in entities}
    rows: list[dict] = []
    for rule in graded:
        if not rule.is_rule:
            continue
        entity = by_id[rule.entity_id]
        record = records.get(rule.entity_id, AttributeRecord(entity_id=rule.entity_id, values={}))
        result = formalize(
            rule, entity, record, induced, runtime.protocol, runtime.session, budget=runtime.config.retry_budget
        )
        rows.append(result.to_json())
    write_json(runtime.path("formal_rules.json"), rows)
    return rows


def stage_eval(runtime: Runtime, doc_id: str, gold_path: str | Path) -> EvalReport:
    gold = GoldAnnotation.load(gold_path)
    formal_rows = read_json(runtime.path("formal_rules.json"))
    entities = load_entities(runtime)
    declarations = {entity.id: entity.declaration_text for entity in entities}

    induced = load_grammar(runtime)
    statements = [
        dsl.parse(induced, row["dsl"]) for row in formal_rows if row.get("parse_ok") and row.get("dsl")
    ]
    usage = runtime.gateway.total_usage
    report = score_run(
        formal_rows,
        gold,
        doc_id,
        declarations,
        distinct_token_count=dsl.distinct_tokens(statements),
        token_usage_totals=(usage.prompt, usage.completion),
    )
    write_json(runtime.path("eval_report.json"), report.to_json())
    return report


# ---------------------------------------------------------------------------
# Full run
# ---------------------------------------------------------------------------


def run_pipeline(doc_path: str | Path, config: RunConfig, transport: Transport | None = None) -> Path:
    """Execute stages 1-5 and write the artifact bundle; returns the out dir."""
    runtime = build_runtime(config, transport=transport)
    doc = corpus.ingest(doc_path)

    entities = stage_localize(runtime, doc)
    _schema, records = stage_attributes(runtime, entities)
    graded = stage_nlrules(runtime, doc, entities)
    induced = stage_grammar(runtime, graded, entities)
    stage_formalize(runtime, graded, entities, {r.entity_id: r for r in records}, induced)

    usage = runtime.gateway.total_usage
    # Local filesystem locations stay out of the manifest so identical runs
    # into different directories produce identical bundles.
    config_json = {
        key: value
        for key, value in runtime.config.to_json().items()
        if key not in ("output_dir", "cassette_path", "prompt_dir")
    }
    manifest = {
        "config": config_json,
        "document": {
            "id": doc.id,
            "source_path": doc.source_path,
            "sha256": corpus.document_digest(doc),
        },
        "cassette": {
            "mode": runtime.config.cassette_mode,
            "sha256": runtime.cassette.file_digest(),
        },
        "prompt_templates": runtime.protocol.store.digests(),
        "token_usage": {"prompt": usage.prompt, "completion": usage.completion},
    }
    write_json(runtime.path("run_manifest.json"), manifest)
    return runtime.out_dir


__all__ = [
    "ARTIFACTS",
    "Runtime",
    "build_runtime",
    "run_pipeline",
    "stage_localize",
    "stage_attributes",
    "stage_nlrules",
    "stage_grammar",
    "stage_formalize",
    "stage_eval",
    "load_entities",
    "load_records",
    "load_graded",
    "load_grammar",
    "read_json",
    "write_json",
    "format_table",
]
