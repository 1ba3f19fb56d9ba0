"""Grammar induction: accumulate sorts, then predicates, across rules.

Sorts name the domain concepts predicates quantify over; predicates carry a
name, a typed parameter list, and a primary flag. A primary predicate forms
the checked claim of a rule; normal predicates appear in conditions. Both
sets grow monotonically over the rule sequence and are never edited
in place.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import BudgetExhausted
from .localizer import Entity
from .nlrules import GradedSentence
from .protocol import ActionSchema, Envelope, Protocol, RepairPlan

log = logging.getLogger(__name__)

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")

# Words the DSL grammar lexes as keywords; a sort or predicate with one of
# these names would collide with the grammar's own tokens.
RESERVED_WORDS = frozenset({"true", "false", "if", "and", "or", "not", "TargetAttr"})

ADD_SORTS = ActionSchema(
    action_name="add_sorts",
    input_schema={
        "type": "array",
        "items": {
            "type": "object",
            "properties": {
                "name": {"type": "string", "description": "Name of the sort."},
                "description": {"type": "string", "description": "Description of the sort."},
            },
            "required": ["name", "description"],
        },
    },
)

ADD_PREDICATES = ActionSchema(
    action_name="add_predicates",
    input_schema={
        "type": "array",
        "items": {
            "type": "object",
            "properties": {
                "name": {"type": "string", "description": "Name of the predicate."},
                "description": {"type": "string", "description": "Description of the predicate."},
                "primary": {"type": "boolean", "description": "Indicates if the predicate is primary."},
                "parameters": {
                    "type": "object",
                    "description": "Parameters of the predicate with their sorts. key is parameter name, value is sort name.",
                },
            },
            "required": ["name", "description", "parameters"],
        },
    },
)


@dataclass(frozen=True)
class Sort:
    name: str
    description: str

    def to_json(self) -> dict:
        return {"name": self.name, "description": self.description}


@dataclass(frozen=True)
class Predicate:
    name: str
    description: str
    primary: bool
    parameters: tuple[tuple[str, str], ...]  # (param_name, sort_name), ordered

    @property
    def arity(self) -> int:
        return len(self.parameters)

    def signature(self) -> str:
        params = ", ".join(f"{param}: {sort}" for param, sort in self.parameters)
        return f"{self.name}({params})"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "primary": self.primary,
            "parameters": {param: sort for param, sort in self.parameters},
        }


def identifier_problem(name: str) -> str | None:
    if not IDENTIFIER.match(name):
        return f"{name!r} is not a valid identifier (must match [A-Za-z_][A-Za-z0-9_]*)"
    if name in RESERVED_WORDS:
        return f"{name!r} collides with a grammar keyword; pick a different name"
    return None


def render_sorts(sorts: Sequence[Sort]) -> str:
    """Bullet-list rendering bound into the accumulation prompts."""
    if not sorts:
        return "N/A"
    return "\n".join(f"- {sort.name}: {sort.description}" for sort in sorts)


def render_predicates(predicates: Sequence[Predicate]) -> str:
    if not predicates:
        return "N/A"
    lines = []
    for pred in predicates:
        kind = "primary" if pred.primary else "normal"
        lines.append(f"- {pred.signature()}: ({kind}) {pred.description}")
    return "\n".join(lines)


def accumulate_sorts(
    rules: Sequence[GradedSentence],
    entities: Mapping[str, Entity],
    protocol: Protocol,
    session_factory,
    budget: int = 3,
) -> list[Sort]:
    """One prompt per rule; new sorts append after identifier/uniqueness checks."""
    sorts: list[Sort] = []
    seen: set[str] = set()
    system = protocol.store.get("sorts.system").body
    template = protocol.store.get("sorts.user")

    for rule in rules:
        entity = entities[rule.entity_id]
        user = template.render(
            {
                "sentence": rule.sentence,
                "entity": entity.declaration_text,
                "accumulated_sorts": render_sorts(sorts),
            }
        )

        def check_identifiers(envelope: Envelope) -> RepairPlan | None:
            for index, action in enumerate(envelope.actions):
                if action.name != "add_sorts":
                    continue
                for item in action.input or []:
                    problem = identifier_problem(item["name"])
                    if problem:
                        return protocol.action_repair(
                            envelope, index, ADD_SORTS.input_schema, f"sort name invalid: {problem}"
                        )
            return None

        try:
            envelope = protocol.invoke(
                session_factory(),
                system=system,
                user=user,
                schemas=[ADD_SORTS],
                budget=budget,
                post_validate=check_identifiers,
            )
        except BudgetExhausted as exc:
            log.warning("sort accumulation gave up for sentence %r: %s", rule.sentence[:60], exc.last_error)
            continue

        for action in envelope.all("add_sorts"):
            for item in action.input or []:
                if item["name"] in seen:
                    continue
                seen.add(item["name"])
                sorts.append(Sort(name=item["name"], description=item["description"]))
    return sorts


def accumulate_predicates(
    rules: Sequence[GradedSentence],
    sorts: Sequence[Sort],
    entities: Mapping[str, Entity],
    protocol: Protocol,
    session_factory,
    budget: int = 3,
) -> list[Predicate]:
    """One prompt per rule over the frozen sort set.

    Every accepted item must reference known sorts, carry a fresh name, and
    have arity >= 1; a response may mark at most one predicate primary.
    """
    predicates: list[Predicate] = []
    seen: set[str] = set()
    sort_names = {sort.name for sort in sorts}
    system = protocol.store.get("predicates.system").body
    template = protocol.store.get("predicates.user")

    def item_problem(item: dict) -> str | None:
        problem = identifier_problem(item["name"])
        if problem:
            return f"predicate name invalid: {problem}"
        parameters = item["parameters"]
        if not parameters:
            return f"predicate {item['name']!r} needs at least one parameter"
        for param, sort_name in parameters.items():
            if sort_name not in sort_names:
                return (
                    f"predicate {item['name']!r} references unknown sort {sort_name!r} "
                    f"for parameter {param!r}; known sorts: {sorted(sort_names)}"
                )
        return None

    for rule in rules:
        entity = entities[rule.entity_id]
        user = template.render(
            {
                "sentence": rule.sentence,
                "target": entity.declaration_text,
                "accumulated_sorts": render_sorts(sorts),
                "accumulated_predicates": render_predicates(predicates),
            }
        )

        def check_items(envelope: Envelope) -> RepairPlan | None:
            primary_count = 0
            for index, action in enumerate(envelope.actions):
                if action.name != "add_predicates":
                    continue
                for item in action.input or []:
                    problem = item_problem(item)
                    if problem:
                        return protocol.action_repair(envelope, index, ADD_PREDICATES.input_schema, problem)
                    if item.get("primary", False):
                        primary_count += 1
            if primary_count > 1:
                return protocol.schema_repair(
                    envelope.to_json(),
                    ADD_PREDICATES.input_schema,
                    "each sentence must have only one primary predicate, "
                    f"but {primary_count} items are marked primary",
                )
            return None

        try:
            envelope = protocol.invoke(
                session_factory(),
                system=system,
                user=user,
                schemas=[ADD_PREDICATES],
                budget=budget,
                post_validate=check_items,
            )
        except BudgetExhausted as exc:
            log.warning("predicate accumulation gave up for sentence %r: %s", rule.sentence[:60], exc.last_error)
            continue

        for action in envelope.all("add_predicates"):
            for item in action.input or []:
                if item["name"] in seen:
                    # Same name with a different signature: keep the first.
                    continue
                seen.add(item["name"])
                predicates.append(
                    Predicate(
                        name=item["name"],
                        description=item["description"],
                        primary=bool(item.get("primary", False)),
                        parameters=tuple(item["parameters"].items()),
                    )
                )
    return predicates


def grammar_to_json(sorts: Sequence[Sort], predicates: Sequence[Predicate]) -> dict:
    return {
        "sorts": [sort.to_json() for sort in sorts],
        "predicates": [pred.to_json() for pred in predicates],
    }


def grammar_from_json(data: dict) -> tuple[list[Sort], list[Predicate]]:
    sorts = [Sort(name=item["name"], description=item["description"]) for item in data["sorts"]]
    predicates = [
        Predicate(
            name=item["name"],
            description=item["description"],
            primary=bool(item.get("primary", False)),
            parameters=tuple(item["parameters"].items()),
        )
        for item in data["predicates"]
    ]
    return sorts, predicates


def dumps_grammar(sorts: Sequence[Sort], predicates: Sequence[Predicate]) -> str:
    return json.dumps(grammar_to_json(sorts, predicates), indent=2, ensure_ascii=False)
