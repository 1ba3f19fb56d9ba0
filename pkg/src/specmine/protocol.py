"""The action protocol spoken with the model.

Every agent prompt asks for a JSON envelope of the form
``{"analysis": ..., "actions": [{"name": ..., "input": ...}]}``. This module
renders prompt templates, parses and validates envelopes against per-action
JSON Schemas, and drives the bounded repair loop: when a response is not
valid JSON, violates a schema, or fails an agent-level check, the matching
repair prompt is appended to the conversation and the model is asked again,
up to the retry budget.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import jsonschema

from .errors import BudgetExhausted, MissingBinding, SpecmineError
from .gateway import Cassette, ChatMessage, ChatRequest, LlmGateway

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 3

_PLACEHOLDER = re.compile(r"\{\{([a-z_]+)\}\}")

# Shape of the response envelope itself, validated before any action input.
ENVELOPE_SCHEMA: dict = {
    "type": "object",
    "properties": {
        "analysis": {"type": "string"},
        "actions": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {"name": {"type": "string"}, "input": {}},
                "required": ["name"],
            },
        },
    },
    "required": ["analysis", "actions"],
}


@dataclass(frozen=True)
class PromptTemplate:
    """A named prompt body with ``{{placeholder}}`` slots."""

    name: str
    body: str

    @property
    def required_placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER.findall(self.body))

    def render(self, bindings: dict[str, str]) -> str:
        missing = self.required_placeholders - set(bindings)
        if missing:
            raise MissingBinding(f"template {self.name!r} missing bindings: {sorted(missing)}")
        # Single-pass substitution: placeholder-like text inside a bound
        # value is data, not a slot.
        return _PLACEHOLDER.sub(lambda m: bindings[m.group(1)], self.body)


def render(template: PromptTemplate, bindings: dict[str, str]) -> str:
    return template.render(bindings)


class PromptStore:
    """Loads prompt templates shipped as package data.

    Files named ``<name>.system.txt`` / ``<name>.user.txt`` become templates
    ``<name>.system`` / ``<name>.user``. A directory of override files with
    the same names takes precedence over the packaged ones.
    """

    def __init__(self, override_dir: str | Path | None = None) -> None:
        self._templates: dict[str, PromptTemplate] = {}
        package_dir = resources.files("specmine").joinpath("prompts")
        for entry in sorted(package_dir.iterdir(), key=lambda item: item.name):
            if entry.name.endswith(".txt"):
                self._add(entry.name, entry.read_text(encoding="utf-8"))
        if override_dir is not None:
            for path in sorted(Path(override_dir).glob("*.txt")):
                self._add(path.name, path.read_text(encoding="utf-8"))

    def _add(self, filename: str, text: str) -> None:
        name = filename[: -len(".txt")]
        self._templates[name] = PromptTemplate(name=name, body=text.rstrip("\n"))

    def get(self, name: str) -> PromptTemplate:
        try:
            return self._templates[name]
        except KeyError:
            raise SpecmineError(f"unknown prompt template {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._templates)

    def digests(self) -> dict[str, str]:
        import hashlib

        return {
            name: hashlib.sha256(tpl.body.encode("utf-8")).hexdigest()
            for name, tpl in sorted(self._templates.items())
        }


@dataclass(frozen=True)
class ActionSchema:
    """An action name plus the JSON Schema its input must satisfy.

    ``input_schema=None`` declares an action that takes no input (the
    boundary agent's ``retry``).
    """

    action_name: str
    input_schema: dict | None


@dataclass(frozen=True)
class Action:
    name: str
    input: object = None


@dataclass(frozen=True)
class Envelope:
    analysis: str
    actions: tuple[Action, ...]

    def first(self, name: str) -> Action | None:
        for action in self.actions:
            if action.name == name:
                return action
        return None

    def all(self, name: str) -> list[Action]:
        return [action for action in self.actions if action.name == name]

    def to_json(self) -> dict:
        return {
            "analysis": self.analysis,
            "actions": [{"name": a.name, "input": a.input} for a in self.actions],
        }


class JsonExtractError(SpecmineError):
    """Response text does not contain a balanced JSON object."""


def extract_json(text: str) -> object:
    """Parse the outermost balanced JSON object out of a model response.

    Tolerates code fences and prose before the first ``{``; anything after
    the balanced object is ignored. Falls back to plain ``json.loads`` for
    responses that are a bare JSON value (arrays, strings).
    """
    stripped = text.strip()
    if stripped.startswith("```"):
        stripped = re.sub(r"^```[A-Za-z]*\n?", "", stripped)
        stripped = re.sub(r"\n?```\s*$", "", stripped)
    start = stripped.find("{")
    if start == -1:
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise JsonExtractError(f"no JSON object found: {exc}") from exc
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(stripped)):
        ch = stripped[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                candidate = stripped[start : i + 1]
                try:
                    return json.loads(candidate)
                except json.JSONDecodeError as exc:
                    raise JsonExtractError(f"unbalanced or invalid JSON object: {exc}") from exc
    raise JsonExtractError("unterminated JSON object in response")


def _validate(instance: object, schema: dict) -> str | None:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(e.absolute_path))
    if not errors:
        return None
    first = errors[0]
    where = "/".join(str(p) for p in first.absolute_path) or "<root>"
    return f"{first.message} (at {where})"


@dataclass
class RepairPlan:
    """What to say next when a response failed validation.

    ``absorb`` interprets the follow-up response when the repair prompt
    bound a fragment (an action input) rather than the whole envelope: it
    maps the refined fragment back into full envelope data. A follow-up
    that already looks like an envelope replaces the envelope wholesale.
    """

    error: str
    user_message: str
    absorb: Callable[[object], object] | None = None


def _looks_like_envelope(data: object) -> bool:
    return isinstance(data, dict) and "analysis" in data and "actions" in data


@dataclass
class ChatSession:
    """One conversation with the model: history plus sampling settings."""

    gateway: LlmGateway
    cassette: Cassette
    temperature: float = 0.8
    messages: list[ChatMessage] = field(default_factory=list)
    exchanges: int = 0

    def say(self, role: str, content: str) -> None:
        self.messages.append(ChatMessage(role, content))

    def ask(self, content: str) -> str:
        self.say("user", content)
        request = ChatRequest(
            messages=tuple(self.messages),
            model=self.gateway.model,
            temperature=self.temperature,
        )
        response = self.gateway.complete(request, self.cassette)
        self.say("assistant", response)
        self.exchanges += 1
        return response


def _dumps(data: object) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False)


class Protocol:
    """Stateless orchestration of prompt/validate/repair conversations."""

    def __init__(self, store: PromptStore) -> None:
        self.store = store

    def schema_repair(
        self, data: object, schema: dict, error: str, absorb: Callable[[object], object] | None = None
    ) -> RepairPlan:
        message = self.store.get("repair_schema.user").render(
            {
                "previous_responsed_json": _dumps(data),
                "expected_schema": _dumps(schema),
                "error": error,
            }
        )
        return RepairPlan(error=error, user_message=message, absorb=absorb)

    def action_repair(self, envelope: Envelope, action_index: int, schema: dict, error: str) -> RepairPlan:
        """Schema repair for one action's input; the refined input is spliced
        back into the envelope."""

        def absorb(parsed: object, envelope: Envelope = envelope, action_index: int = action_index) -> object:
            data = envelope.to_json()
            data["actions"][action_index]["input"] = parsed
            return data

        return self.schema_repair(envelope.actions[action_index].input, schema, error, absorb=absorb)

    def json_repair(self, previous_response: str, error: str) -> RepairPlan:
        message = self.store.get("repair_json.user").render(
            {"previous_response": previous_response, "error": error}
        )
        return RepairPlan(error=error, user_message=message)

    def _parse_envelope(self, data: object, schemas: Sequence[ActionSchema]) -> tuple[Envelope | None, RepairPlan | None]:
        """Validate envelope shape and every action input; None plan means valid."""
        known = {schema.action_name: schema for schema in schemas}
        error = _validate(data, ENVELOPE_SCHEMA)
        if error is not None:
            return None, self.schema_repair(data, ENVELOPE_SCHEMA, error)
        assert isinstance(data, dict)
        actions: list[Action] = []
        for index, item in enumerate(data["actions"]):
            name = item["name"]
            if name not in known:
                error = f"unknown action {name!r}; declared actions: {sorted(known)}"
                return None, self.schema_repair(data, ENVELOPE_SCHEMA, error)
            action_input = item.get("input")
            schema = known[name].input_schema
            if schema is not None:
                error = _validate(action_input, schema)
                if error is not None:

                    def absorb(parsed: object, data: dict = data, index: int = index) -> object:
                        patched = json.loads(json.dumps(data))
                        patched["actions"][index]["input"] = parsed
                        return patched

                    plan = self.schema_repair(
                        action_input, schema, f"input of action {name!r}: {error}", absorb=absorb
                    )
                    return None, plan
            actions.append(Action(name=name, input=action_input))
        return Envelope(analysis=data["analysis"], actions=tuple(actions)), None

    def invoke(
        self,
        session: ChatSession,
        *,
        system: str | None,
        user: str,
        schemas: Sequence[ActionSchema],
        budget: int = DEFAULT_BUDGET,
        require_action: bool = False,
        post_validate: Callable[[Envelope], RepairPlan | None] | None = None,
    ) -> Envelope:
        """Send a prompt and return a schema-valid Envelope, repairing up to ``budget`` times.

        Each failed response costs one unit of the shared budget, whatever
        the failure kind (malformed JSON, schema violation, or a
        ``post_validate`` rejection). The total number of exchanges is at
        most ``1 + budget``.
        """
        if budget < 0:
            raise ValueError("budget must be >= 0")
        if system is not None:
            session.say("system", system)
        last_envelope: Envelope | None = None
        next_message = user
        remaining = budget
        pending_absorb: Callable[[object], object] | None = None
        while True:
            response = session.ask(next_message)
            plan: RepairPlan | None = None
            envelope: Envelope | None = None
            json_failure = False
            try:
                data = extract_json(response)
            except JsonExtractError as exc:
                plan = self.json_repair(response, str(exc))
                json_failure = True
            else:
                if pending_absorb is not None and not _looks_like_envelope(data):
                    data = pending_absorb(data)
                envelope, plan = self._parse_envelope(data, schemas)
            if envelope is not None and plan is None:
                last_envelope = envelope
                if require_action and not envelope.actions:
                    plan = self.schema_repair(
                        data,
                        ENVELOPE_SCHEMA,
                        "the actions array is empty, but this request requires at least one action",
                    )
                elif post_validate is not None:
                    plan = post_validate(envelope)
            if plan is None:
                assert envelope is not None
                return envelope
            if remaining == 0:
                raise BudgetExhausted(
                    f"retry budget of {budget} exhausted: {plan.error}",
                    last_error=plan.error,
                    transcript=session.messages,
                    last_envelope=last_envelope,
                )
            remaining -= 1
            if not json_failure:
                # A JSON failure repairs the previous response in place, so
                # any pending fragment interpretation stays active.
                pending_absorb = plan.absorb
            next_message = plan.user_message

    def repair_regex(
        self,
        session: ChatSession,
        pattern: str,
        example: str,
        error: str,
        budget: int = DEFAULT_BUDGET,
    ) -> str:
        """Ask the model to fix a regex until it compiles and matches its example."""
        current_pattern, current_error = pattern, error
        for _ in range(budget):
            message = self.store.get("repair_regex.user").render(
                {"pattern": current_pattern, "example": example, "error": current_error}
            )
            response = session.ask(message)
            candidate = _strip_pattern_response(response)
            problem = regex_problem(candidate, example)
            if problem is None:
                return candidate
            current_pattern, current_error = candidate, problem
        raise BudgetExhausted(
            f"regex repair budget of {budget} exhausted for pattern {pattern!r}",
            last_error=current_error,
            transcript=session.messages,
        )


def _strip_pattern_response(response: str) -> str:
    """Reduce a repair response to the bare pattern text."""
    text = response.strip()
    if text.startswith("```"):
        text = re.sub(r"^```[A-Za-z]*\n?", "", text)
        text = re.sub(r"\n?```\s*$", "", text)
        text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"`":
        text = text[1:-1]
    return text.splitlines()[0].strip() if text else text


def regex_problem(pattern: str, example: str) -> str | None:
    """Return why ``pattern`` is unusable for ``example``, or None if fine."""
    try:
        compiled = re.compile(pattern)
    except re.error as exc:
        return f"pattern does not compile: {exc}"
    if compiled.search(example) is None:
        return f"pattern compiled but does not match its example line: {example!r}"
    return None
