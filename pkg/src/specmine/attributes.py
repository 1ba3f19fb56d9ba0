"""Stage 2: grow a shared attribute schema, then extract per-entity values.

The schema pass accumulates attribute definitions (name, description, value
schema) across entities; the value pass extracts a record per entity against
the full frozen schema. No regexes here: consistency comes from feeding the
complete schema back into every prompt.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import jsonschema

from .errors import BudgetExhausted
from .localizer import Entity
from .protocol import ActionSchema, Envelope, Protocol, RepairPlan

log = logging.getLogger(__name__)

RECORD_ADDITIONAL_ATTRIBUTES = ActionSchema(
    action_name="record_additional_attributes",
    input_schema={
        "type": "object",
        "properties": {
            "attributes": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "name": {"type": "string", "description": "Name of the attribute."},
                        "description": {"type": "string", "description": "Description of the attribute."},
                        "schema": {"type": "object", "description": "JSON schema of the attribute value."},
                    },
                    "required": ["name", "description", "schema"],
                },
            }
        },
        "required": ["attributes"],
    },
)

RECORD_ATTRIBUTE_VALUES = ActionSchema(
    action_name="record_attribute_values",
    input_schema={
        "type": "object",
        "properties": {
            "attribute_values": {
                "type": "object",
                "description": "Mapping of attribute names to extracted values.",
            }
        },
        "required": ["attribute_values"],
    },
)


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    description: str
    value_schema: dict

    def to_json(self) -> dict:
        return {"name": self.name, "description": self.description, "schema": self.value_schema}


@dataclass
class AttributeSchema:
    """Ordered attribute definitions; grows monotonically, names unique."""

    attributes: list[AttributeSpec] = field(default_factory=list)

    def names(self) -> set[str]:
        return {spec.name for spec in self.attributes}

    def get(self, name: str) -> AttributeSpec | None:
        for spec in self.attributes:
            if spec.name == name:
                return spec
        return None

    def add(self, spec: AttributeSpec) -> bool:
        if spec.name in self.names():
            return False
        self.attributes.append(spec)
        return True

    def to_json(self) -> list:
        return [spec.to_json() for spec in self.attributes]

    @classmethod
    def from_json(cls, data: list) -> "AttributeSchema":
        return cls(
            attributes=[
                AttributeSpec(name=item["name"], description=item["description"], value_schema=item["schema"])
                for item in data
            ]
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False)


@dataclass(frozen=True)
class AttributeRecord:
    """Validated attribute values for one entity; absent attributes omitted."""

    entity_id: str
    values: dict

    def to_json(self) -> dict:
        return {"entity_id": self.entity_id, "values": self.values}


def value_schema_problem(schema: object) -> str | None:
    """A usable value schema is an object with at least a type or enum key."""
    if not isinstance(schema, dict):
        return "attribute schema must be a JSON object"
    if "type" not in schema and "enum" not in schema:
        return "attribute schema must declare a 'type' or an 'enum'"
    try:
        jsonschema.Draft202012Validator.check_schema(schema)
    except jsonschema.SchemaError as exc:
        return f"attribute schema is not a valid JSON Schema: {exc.message}"
    return None


def grow_schema(
    entities: Sequence[Entity],
    protocol: Protocol,
    session_factory,
    budget: int = 3,
) -> AttributeSchema:
    """One prompt per entity, each seeing the schema accumulated so far.

    Malformed value schemas are re-requested through the repair loop;
    duplicate names are dropped silently (the schema never shrinks or
    mutates). An entity whose conversation exhausts the budget is skipped.
    """
    schema = AttributeSchema()
    system = protocol.store.get("attribute_schema.system").body
    template = protocol.store.get("attribute_schema.user")

    for entity in entities:
        user = template.render(
            {
                "entity": entity.declaration_text,
                "accumulated_attributes": schema.dumps(),
            }
        )

        def check_items(envelope: Envelope) -> RepairPlan | None:
            for index, action in enumerate(envelope.actions):
                if action.name != "record_additional_attributes":
                    continue
                for item in (action.input or {}).get("attributes", []):
                    problem = value_schema_problem(item["schema"])
                    if problem:
                        return protocol.action_repair(
                            envelope,
                            index,
                            RECORD_ADDITIONAL_ATTRIBUTES.input_schema,
                            f"attribute {item['name']!r}: {problem}",
                        )
            return None

        try:
            envelope = protocol.invoke(
                session_factory(),
                system=system,
                user=user,
                schemas=[RECORD_ADDITIONAL_ATTRIBUTES],
                budget=budget,
                post_validate=check_items,
            )
        except BudgetExhausted as exc:
            log.warning("schema growth skipped entity %s: %s", entity.id, exc.last_error)
            continue

        for action in envelope.all("record_additional_attributes"):
            for item in (action.input or {}).get("attributes", []):
                schema.add(
                    AttributeSpec(name=item["name"], description=item["description"], value_schema=item["schema"])
                )
    return schema


def _invalid_keys(values: dict, schema: AttributeSchema) -> list[tuple[str, str]]:
    """(attribute, error) for every known key whose value fails its schema."""
    problems: list[tuple[str, str]] = []
    for key, value in values.items():
        spec = schema.get(key)
        if spec is None:
            continue
        validator = jsonschema.Draft202012Validator(spec.value_schema)
        errors = list(validator.iter_errors(value))
        if errors:
            problems.append((key, errors[0].message))
    return problems


def extract_values(
    entity: Entity,
    schema: AttributeSchema,
    protocol: Protocol,
    session_factory,
    budget: int = 3,
) -> AttributeRecord:
    """Extract one validated record for the entity against the full schema.

    Keys outside the schema are dropped with a warning. A value that fails
    its attribute's schema triggers the repair loop; if the budget runs out,
    failing keys are dropped and the rest of the record is kept.
    """
    system = protocol.store.get("attribute_values.system").body
    user = protocol.store.get("attribute_values.user").render(
        {
            "entity": entity.declaration_text,
            "accumulated_attributes": schema.dumps(),
        }
    )

    def check_values(envelope: Envelope) -> RepairPlan | None:
        for index, action in enumerate(envelope.actions):
            if action.name != "record_attribute_values":
                continue
            values = (action.input or {}).get("attribute_values", {})
            problems = _invalid_keys(values, schema)
            if not problems:
                continue
            key, message = problems[0]
            spec = schema.get(key)
            assert spec is not None

            def absorb(parsed: object, envelope: Envelope = envelope, index: int = index) -> object:
                wrapped = parsed
                if not (isinstance(parsed, dict) and set(parsed) == {"attribute_values"}):
                    wrapped = {"attribute_values": parsed}
                data = envelope.to_json()
                data["actions"][index]["input"] = wrapped
                return data

            return protocol.schema_repair(
                values, {"type": "object", "properties": {key: spec.value_schema}},
                f"value of attribute {key!r} is invalid: {message}",
                absorb=absorb,
            )
        return None

    def build_record(envelope: Envelope | None, drop_invalid: bool) -> AttributeRecord:
        if envelope is None:
            return AttributeRecord(entity_id=entity.id, values={})
        action = envelope.first("record_attribute_values")
        if action is None:
            return AttributeRecord(entity_id=entity.id, values={})
        raw = (action.input or {}).get("attribute_values", {})
        values: dict = {}
        invalid = {key for key, _ in _invalid_keys(raw, schema)} if drop_invalid else set()
        for key, value in raw.items():
            if schema.get(key) is None:
                log.warning("entity %s: dropping unknown attribute %r", entity.id, key)
                continue
            if key in invalid:
                log.warning("entity %s: dropping invalid value for %r", entity.id, key)
                continue
            values[key] = value
        return AttributeRecord(entity_id=entity.id, values=values)

    try:
        envelope = protocol.invoke(
            session_factory(),
            system=system,
            user=user,
            schemas=[RECORD_ATTRIBUTE_VALUES],
            budget=budget,
            require_action=True,
            post_validate=check_values,
        )
    except BudgetExhausted as exc:
        log.warning("value extraction exhausted budget for entity %s: %s", entity.id, exc.last_error)
        return build_record(exc.last_envelope, drop_invalid=True)
    return build_record(envelope, drop_invalid=False)
