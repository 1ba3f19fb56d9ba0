"""Stage 5: turn each graded rule into one grammar-valid DSL statement.

The prompt carries the rendered grammar, the sentence, the entity, and its
attribute record. The returned statement must end with ';' and parse under
the induced grammar; a parse failure re-prompts with the grammar-repair
template (previous attempt plus the parse error) within the shared budget.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from .attributes import AttributeRecord
from .dsl import DslStatement, InducedGrammar, parse, unresolved_selectors
from .errors import BudgetExhausted, ParseError
from .localizer import Entity
from .nlrules import GradedSentence
from .protocol import ActionSchema, Envelope, Protocol, RepairPlan

log = logging.getLogger(__name__)

WRITE_DSL = ActionSchema(
    action_name="write_dsl",
    input_schema={
        "type": "object",
        "properties": {
            "dsl": {
                "type": "string",
                "description": "A single DSL statement that ends with ';' and parses with the grammar.",
            }
        },
        "required": ["dsl"],
    },
)


@dataclass(frozen=True)
class FormalRule:
    """One formalized rule; ``dsl`` is None when the budget ran out."""

    entity_id: str
    sentence: str
    dsl: DslStatement | None
    attempts: int
    error: str | None = None

    @property
    def parse_ok(self) -> bool:
        return self.dsl is not None

    def to_json(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "sentence": self.sentence,
            "dsl": self.dsl.text if self.dsl else None,
            "parse_ok": self.parse_ok,
            "attempts": self.attempts,
            "error": self.error,
        }


def formalize(
    rule: GradedSentence,
    entity: Entity,
    record: AttributeRecord,
    grammar: InducedGrammar,
    protocol: Protocol,
    session_factory,
    budget: int = 3,
) -> FormalRule:
    """Formalize one rule; unformalizable rules are persisted with their error."""
    if not rule.is_rule:
        raise ValueError("only sentences classified as rules are formalized")

    bindings = {
        "grammar": grammar.rendered_ebnf,
        "sentence": rule.sentence,
        "entity": entity.declaration_text,
        "entity_attributes": json.dumps(record.values, indent=2, ensure_ascii=False),
    }
    system = protocol.store.get("formalize.system").body
    user = protocol.store.get("formalize.user").render(bindings)
    repair_template = protocol.store.get("repair_ebnf.user")

    parsed: dict[str, DslStatement] = {}

    def check_dsl(envelope: Envelope) -> RepairPlan | None:
        action = envelope.first("write_dsl")
        if action is None:
            return None
        text = action.input["dsl"].strip()
        problem: str | None = None
        if not text.endswith(";"):
            problem = "statement must end with ';'"
        else:
            try:
                parsed["stmt"] = parse(grammar, text)
            except ParseError as exc:
                problem = str(exc)
        if problem is None:
            return None
        return RepairPlan(
            error=problem,
            user_message=repair_template.render({**bindings, "dsl": text, "error": problem}),
        )

    session = session_factory()
    try:
        envelope = protocol.invoke(
            session,
            system=system,
            user=user,
            schemas=[WRITE_DSL],
            budget=budget,
            require_action=True,
            post_validate=check_dsl,
        )
    except BudgetExhausted as exc:
        log.warning("rule left unformalized (%s): %s", rule.sentence[:60], exc.last_error)
        return FormalRule(
            entity_id=rule.entity_id,
            sentence=rule.sentence,
            dsl=None,
            attempts=session.exchanges,
            error=exc.last_error,
        )

    action = envelope.first("write_dsl")
    assert action is not None and "stmt" in parsed
    statement = parsed["stmt"]
    for path in unresolved_selectors(statement, record.values):
        log.warning("statement references attribute path with no value: %s", path)
    return FormalRule(
        entity_id=rule.entity_id,
        sentence=rule.sentence,
        dsl=statement,
        attempts=session.exchanges,
    )
