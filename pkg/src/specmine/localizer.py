"""Stage 1: accumulate regex patterns over sliding windows, then match.

The model proposes target patterns (lines that declare entities) and exclude
patterns (lines to ignore). Pattern sets only ever grow during a run. Actual
entity location is deterministic: the regex engine filters excluded lines
first, then records the first target-pattern match per line.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field

from .corpus import Document, Window
from .errors import BudgetExhausted
from .protocol import ActionSchema, Protocol, regex_problem

log = logging.getLogger(__name__)

_PATTERN_ITEM_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "example": {
                "type": "string",
                "description": "An example line that matches the target pattern.",
            },
            "pattern": {
                "type": "string",
                "description": "regex pattern to identify targets. For example, to identify function "
                "declarations, the pattern can be '^function\\s+\\w+\\s*\\(.*\\)'.",
            },
        },
        "required": ["pattern", "example"],
    },
}

NEW_TARGET_PATTERNS = ActionSchema(action_name="new_target_patterns", input_schema=_PATTERN_ITEM_SCHEMA)
NEW_EXCLUDE_PATTERNS = ActionSchema(
    action_name="new_exclude_patterns",
    input_schema={
        "type": "array",
        "items": {
            "type": "object",
            "properties": {
                "example": {
                    "type": "string",
                    "description": "An example line that matches the exclude pattern.",
                },
                "pattern": {
                    "type": "string",
                    "description": "regex pattern to exclude certain lines from been considered as target. "
                    "For example, to exclude lines that are comments.",
                },
            },
            "required": ["pattern", "example"],
        },
    },
)


@dataclass(frozen=True)
class PatternExample:
    pattern: str
    example: str

    def to_json(self) -> dict:
        return {"pattern": self.pattern, "example": self.example}


@dataclass
class PatternSet:
    """Ordered, deduplicated target and exclude patterns.

    Invariant: every stored pattern compiles and matches its own example.
    """

    target_patterns: list[PatternExample] = field(default_factory=list)
    exclude_patterns: list[PatternExample] = field(default_factory=list)

    def add_target(self, item: PatternExample) -> bool:
        if any(existing.pattern == item.pattern for existing in self.target_patterns):
            return False
        self.target_patterns.append(item)
        return True

    def add_exclude(self, item: PatternExample) -> bool:
        if any(existing.pattern == item.pattern for existing in self.exclude_patterns):
            return False
        self.exclude_patterns.append(item)
        return True

    def to_json(self) -> dict:
        return {
            "target_patterns": [item.to_json() for item in self.target_patterns],
            "exclude_patterns": [item.to_json() for item in self.exclude_patterns],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PatternSet":
        return cls(
            target_patterns=[PatternExample(**item) for item in data["target_patterns"]],
            exclude_patterns=[PatternExample(**item) for item in data["exclude_patterns"]],
        )


@dataclass(frozen=True)
class Entity:
    """A code element located on one document line."""

    id: str
    doc_id: str
    line_no: int
    matched_text: str
    pattern: str
    declaration_text: str

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "doc_id": self.doc_id,
            "line_no": self.line_no,
            "matched_text": self.matched_text,
            "pattern": self.pattern,
            "declaration_text": self.declaration_text,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Entity":
        return cls(**data)


def entity_id(doc_id: str, line_no: int, matched_text: str) -> str:
    digest = hashlib.sha256(f"{doc_id}\n{line_no}\n{matched_text}".encode("utf-8")).hexdigest()
    return digest[:16]


def _render_target_patterns(ps: PatternSet) -> str:
    if not ps.target_patterns:
        return "N/A"
    return json.dumps([item.pattern for item in ps.target_patterns], ensure_ascii=False)


def _render_exclude_patterns(ps: PatternSet) -> str:
    return json.dumps([item.pattern for item in ps.exclude_patterns], ensure_ascii=False)


def accumulate_patterns(
    doc: Document,
    windows: list[Window],
    protocol: Protocol,
    session_factory,
    budget: int = 3,
) -> PatternSet:
    """Grow the pattern set window by window.

    Earlier patterns are bound back into each prompt so the model only adds
    what is missing. A proposed pattern that fails to compile or to match
    its own example goes through the regex repair loop; if that also fails,
    the item is dropped. A window whose conversation exhausts the retry
    budget is skipped with a warning and the run continues.
    """
    ps = PatternSet()
    system = protocol.store.get("localize.system").body
    template = protocol.store.get("localize.user")

    for window in windows:
        user = template.render(
            {
                "chunk": window.text,
                "previous_target_patterns": _render_target_patterns(ps),
                "previous_exclude_patterns": _render_exclude_patterns(ps),
            }
        )
        try:
            envelope = protocol.invoke(
                session_factory(),
                system=system,
                user=user,
                schemas=[NEW_TARGET_PATTERNS, NEW_EXCLUDE_PATTERNS],
                budget=budget,
            )
        except BudgetExhausted as exc:
            log.warning(
                "pattern accumulation skipped window %d-%d: %s",
                window.start_line,
                window.end_line,
                exc.last_error,
            )
            continue

        for action in envelope.actions:
            adder = ps.add_target if action.name == "new_target_patterns" else ps.add_exclude
            for item in action.input or []:
                candidate = PatternExample(pattern=item["pattern"], example=item["example"])
                problem = regex_problem(candidate.pattern, candidate.example)
                if problem is not None:
                    try:
                        fixed = protocol.repair_regex(
                            session_factory(), candidate.pattern, candidate.example, problem, budget=budget
                        )
                    except BudgetExhausted as exc:
                        log.warning("dropping unusable pattern %r: %s", candidate.pattern, exc.last_error)
                        continue
                    candidate = PatternExample(pattern=fixed, example=candidate.example)
                adder(candidate)
    return ps


def match_entities(doc: Document, ps: PatternSet) -> list[Entity]:
    """Deterministically locate entities: filter excluded lines, then match.

    A line matching any exclude pattern yields nothing even if a target
    pattern also matches. On remaining lines the first target pattern (in
    insertion order) that matches wins; its first match span is recorded.
    """
    target = [(item.pattern, re.compile(item.pattern)) for item in ps.target_patterns]
    exclude = [re.compile(item.pattern) for item in ps.exclude_patterns]
    entities: list[Entity] = []
    for line in doc.lines:
        if any(regex.search(line.text) for regex in exclude):
            continue
        for pattern, regex in target:
            match = regex.search(line.text)
            if match:
                matched = match.group(0)
                entities.append(
                    Entity(
                        id=entity_id(doc.id, line.no, matched),
                        doc_id=doc.id,
                        line_no=line.no,
                        matched_text=matched,
                        pattern=pattern,
                        declaration_text=line.text,
                    )
                )
                break
    return entities
