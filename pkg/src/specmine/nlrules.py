"""Stage 3: find description boundaries, split sentences, grade, judge.

Each entity's description is assumed to sit above its declaration line. The
boundary search feeds growing blocks of preceding lines to the model until
it reports the first line of the description. Sentences are then extracted
verbatim, graded twice, and classified by the deterministic logistic judge:

    score = 1 / (1 + exp(-(r1*c1 + r2*c2)))   with r = +1 or -1

A sentence is a rule iff its score is strictly greater than 0.5.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass

from .corpus import Document, slice as doc_slice
from .errors import BudgetExhausted
from .localizer import Entity
from .protocol import ActionSchema, Envelope, Protocol, RepairPlan

log = logging.getLogger(__name__)

RETRY = ActionSchema(action_name="retry", input_schema=None)
FOUND_BOUNDARY = ActionSchema(
    action_name="found_boundary",
    input_schema={
        "type": "object",
        "properties": {
            "line": {
                "type": "integer",
                "description": "The line number where the upper boundary line is found.",
            }
        },
        "required": ["line"],
    },
)

EXTRACT_SENTENCE = ActionSchema(
    action_name="extract_sentence",
    input_schema={
        "type": "array",
        "description": "List of extracted sentences. Each array item is a sentence string.",
        "items": {
            "type": "object",
            "properties": {
                "sentence": {
                    "type": "string",
                    "description": "A sentence that is relevant to the target.",
                },
                "complete": {
                    "type": "boolean",
                    "description": "Whether the sentence is complete or not. If false, it means the "
                    "sentence is incomplete and more lines are needed to complete it.",
                },
            },
        },
    },
)

JUDGE_SENTENCE = ActionSchema(
    action_name="judge_sentence",
    input_schema={
        "type": "object",
        "properties": {
            "reason": {
                "type": "string",
                "description": "The reason why the sentence is a normative rule or not.",
            },
            "confidence": {
                "type": "number",
                "description": "The confidence score (between 0 and 1) that the sentence is a "
                "normative rule that applies to the target.",
            },
            "is_rule": {
                "type": "boolean",
                "description": "Whether the sentence is a normative rule that applies to the target.",
            },
        },
        "required": ["is_rule", "reason", "confidence"],
    },
)


@dataclass(frozen=True)
class DescriptionSpan:
    """The line range holding an entity's description text."""

    entity_id: str
    upper_line: int
    lower_line: int
    text: str
    heuristic: bool = False  # True when the boundary search fell back


@dataclass(frozen=True)
class GradeVote:
    is_rule: bool
    confidence: float
    reason: str

    def to_json(self) -> dict:
        return {"is_rule": self.is_rule, "confidence": self.confidence, "reason": self.reason}


@dataclass(frozen=True)
class GradedSentence:
    entity_id: str
    sentence: str
    votes: tuple[GradeVote, GradeVote]
    score: float
    is_rule: bool

    def to_json(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "sentence": self.sentence,
            "votes": [vote.to_json() for vote in self.votes],
            "score": self.score,
            "is_rule": self.is_rule,
        }


def judge(votes: tuple[GradeVote, GradeVote]) -> tuple[float, bool]:
    """Logistic score over the two signed confidences; strict > 0.5 cutoff."""
    total = sum(vote.confidence if vote.is_rule else -vote.confidence for vote in votes)
    score = 1.0 / (1.0 + math.exp(-total))
    return score, score > 0.5


def _span_text(doc: Document, upper: int, lower: int) -> str:
    return "\n".join(doc.line(no) for no in range(upper, lower + 1))


def _make_span(doc: Document, entity: Entity, upper: int, heuristic: bool) -> DescriptionSpan:
    upper = max(1, min(upper, entity.line_no))
    lower = entity.line_no - 1 if entity.line_no > upper else entity.line_no
    return DescriptionSpan(
        entity_id=entity.id,
        upper_line=upper,
        lower_line=lower,
        text=_span_text(doc, upper, lower),
        heuristic=heuristic,
    )


def find_boundary(
    entity: Entity,
    doc: Document,
    protocol: Protocol,
    session_factory,
    block_size: int = 20,
    fallback_lines: int = 10,
    budget: int = 3,
) -> DescriptionSpan:
    """Search upward for the first line of the entity's description.

    Each attempt shows the numbered chunk from ``block_size`` more lines
    above the entity down to the entity line; a ``retry`` action widens the
    chunk. Hitting the document start without an answer, or exhausting the
    repair budget, falls back to ``fallback_lines`` lines above the entity
    and flags the span as heuristic.
    """
    if entity.line_no == 1:
        return _make_span(doc, entity, upper=1, heuristic=False)

    system = protocol.store.get("boundary.system").body
    template = protocol.store.get("boundary.user")
    blocks = 1
    while True:
        chunk_start = max(1, entity.line_no - blocks * block_size)
        chunk = doc_slice(doc, chunk_start, entity.line_no)
        user = template.render({"entity": entity.declaration_text, "chunk": chunk.text})
        try:
            envelope = protocol.invoke(
                session_factory(),
                system=system,
                user=user,
                schemas=[RETRY, FOUND_BOUNDARY],
                budget=budget,
                require_action=True,
            )
        except BudgetExhausted as exc:
            log.warning("boundary search for entity %s fell back: %s", entity.id, exc.last_error)
            return _make_span(doc, entity, upper=entity.line_no - fallback_lines, heuristic=True)

        found = envelope.first("found_boundary")
        if found is not None:
            return _make_span(doc, entity, upper=int(found.input["line"]), heuristic=False)
        if chunk_start == 1:
            log.warning("boundary search for entity %s reached document start; falling back", entity.id)
            return _make_span(doc, entity, upper=entity.line_no - fallback_lines, heuristic=True)
        blocks += 1


def _normalize_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def split_sentences(
    span: DescriptionSpan,
    entity: Entity,
    doc: Document,
    protocol: Protocol,
    session_factory,
    block_size: int = 20,
    budget: int = 3,
) -> list[tuple[str, bool]]:
    """Split the description into verbatim sentences.

    Every returned sentence must appear in the chunk (whitespace
    normalized); offenders are re-requested through the repair loop. If any
    sentence comes back incomplete, the span is extended upward once by
    ``block_size`` lines and re-queried; sentences still incomplete after
    that are dropped with a warning.
    """
    system = protocol.store.get("sentences.system").body
    template = protocol.store.get("sentences.user")

    def query(text: str) -> list[tuple[str, bool]]:
        normalized_chunk = _normalize_ws(text)

        def check_verbatim(envelope: Envelope) -> RepairPlan | None:
            for index, action in enumerate(envelope.actions):
                if action.name != "extract_sentence":
                    continue
                for item in action.input or []:
                    if "sentence" not in item:
                        return protocol.action_repair(
                            envelope, index, EXTRACT_SENTENCE.input_schema,
                            "every item needs a 'sentence' string",
                        )
                    if _normalize_ws(item["sentence"]) not in normalized_chunk:
                        return protocol.action_repair(
                            envelope, index, EXTRACT_SENTENCE.input_schema,
                            f"sentence is not present in the chunk (sentences must be exactly as in "
                            f"the chunk): {item['sentence']!r}",
                        )
            return None

        envelope = protocol.invoke(
            session_factory(),
            system=system,
            user=template.render({"entity": entity.declaration_text, "chunk": text}),
            schemas=[EXTRACT_SENTENCE],
            budget=budget,
            post_validate=check_verbatim,
        )
        action = envelope.first("extract_sentence")
        if action is None:
            return []
        return [(item["sentence"], bool(item.get("complete", True))) for item in action.input or []]

    try:
        sentences = query(span.text)
    except BudgetExhausted as exc:
        log.warning("sentence split failed for entity %s: %s", entity.id, exc.last_error)
        return []

    if any(not complete for _, complete in sentences):
        extended_upper = max(1, span.upper_line - block_size)
        extended_text = _span_text(doc, extended_upper, span.lower_line)
        try:
            sentences = query(extended_text)
        except BudgetExhausted as exc:
            log.warning("extended sentence split failed for entity %s: %s", entity.id, exc.last_error)
        kept = []
        for sentence, complete in sentences:
            if complete:
                kept.append((sentence, complete))
            else:
                log.warning("dropping incomplete sentence for entity %s: %r", entity.id, sentence[:60])
        sentences = kept
    return sentences


def grade(
    sentence: str,
    entity: Entity,
    protocol: Protocol,
    session_factory,
    budget: int = 3,
) -> tuple[GradeVote, GradeVote]:
    """Grade the sentence twice with identical prompts.

    A vote whose conversation exhausts the budget is replaced by the
    neutral vote (is_rule=False, confidence=0).
    """
    system = protocol.store.get("grade.system").body
    user = protocol.store.get("grade.user").render(
        {"entity": entity.declaration_text, "sentence": sentence}
    )

    def confidence_in_range(envelope: Envelope) -> RepairPlan | None:
        for index, action in enumerate(envelope.actions):
            if action.name != "judge_sentence":
                continue
            confidence = action.input["confidence"]
            if not 0.0 <= confidence <= 1.0:
                return protocol.action_repair(
                    envelope, index, JUDGE_SENTENCE.input_schema,
                    f"confidence must be between 0 and 1, got {confidence}",
                )
        return None

    votes: list[GradeVote] = []
    for attempt in (1, 2):
        try:
            envelope = protocol.invoke(
                session_factory(),
                system=system,
                user=user,
                schemas=[JUDGE_SENTENCE],
                budget=budget,
                require_action=True,
                post_validate=confidence_in_range,
            )
            action = envelope.first("judge_sentence")
            assert action is not None
            votes.append(
                GradeVote(
                    is_rule=bool(action.input["is_rule"]),
                    confidence=float(action.input["confidence"]),
                    reason=action.input["reason"],
                )
            )
        except BudgetExhausted as exc:
            log.warning("grade vote %d failed for %r: %s", attempt, sentence[:60], exc.last_error)
            votes.append(GradeVote(is_rule=False, confidence=0.0, reason="vote failed; neutral substitute"))
    return votes[0], votes[1]


# The declaration line itself always counts as a rule: synthetic unanimous
# votes keep the artifact schema uniform.
DECLARATION_REASON = "entity declaration line; implicit rule"


def declaration_rule(entity: Entity) -> GradedSentence:
    votes = (
        GradeVote(is_rule=True, confidence=1.0, reason=DECLARATION_REASON),
        GradeVote(is_rule=True, confidence=1.0, reason=DECLARATION_REASON),
    )
    score, is_rule = judge(votes)
    return GradedSentence(
        entity_id=entity.id,
        sentence=entity.declaration_text,
        votes=votes,
        score=score,
        is_rule=is_rule,
    )


def extract_rules_for_entity(
    entity: Entity,
    doc: Document,
    protocol: Protocol,
    session_factory,
    block_size: int = 20,
    fallback_lines: int = 10,
    budget: int = 3,
) -> list[GradedSentence]:
    """Run the full stage for one entity; the declaration rule is appended last."""
    span = find_boundary(
        entity, doc, protocol, session_factory,
        block_size=block_size, fallback_lines=fallback_lines, budget=budget,
    )
    graded: list[GradedSentence] = []
    if span.text.strip():
        for sentence, _complete in split_sentences(
            span, entity, doc, protocol, session_factory, block_size=block_size, budget=budget
        ):
            votes = grade(sentence, entity, protocol, session_factory, budget=budget)
            score, is_rule = judge(votes)
            graded.append(
                GradedSentence(
                    entity_id=entity.id,
                    sentence=sentence,
                    votes=votes,
                    score=score,
                    is_rule=is_rule,
                )
            )
    graded.append(declaration_rule(entity))
    return graded
