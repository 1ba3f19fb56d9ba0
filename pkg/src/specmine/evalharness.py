"""Score a run against gold annotations.

A formalized rule is a true positive when its (entity, sentence) matches a
gold ``rule`` item under whitespace-normalized, case-sensitive equality and
its DSL parsed. Gold rules nobody matched are false negatives; parsed rules
matching nothing (or matching a ``not_rule`` item) are false positives. A
gold item can carry ``"override": "misformalized"`` to record a human
judgment that the produced DSL is semantically wrong: a match then counts
as FP and the item as FN.

Near-misses (same entity, sentence equal only case-insensitively) are
reported for human review but not scored.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import EmptyInput, GoldMismatch

LABELS = ("rule", "not_rule")


@dataclass(frozen=True)
class GoldItem:
    entity_hint: str
    sentence: str
    label: str
    override: str | None = None

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"gold label must be one of {LABELS}, got {self.label!r}")


@dataclass(frozen=True)
class GoldAnnotation:
    doc_id: str
    items: tuple[GoldItem, ...]

    @classmethod
    def load(cls, path: str | Path) -> "GoldAnnotation":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        items = tuple(
            GoldItem(
                entity_hint=item["entity_hint"],
                sentence=item["sentence"],
                label=item["label"],
                override=item.get("override"),
            )
            for item in data["items"]
        )
        return cls(doc_id=data["doc_id"], items=items)


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    distinct_token_count: int
    token_usage_totals: tuple[int, int]
    near_misses: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "distinct_token_count": self.distinct_token_count,
            "token_usage_totals": {
                "prompt": self.token_usage_totals[0],
                "completion": self.token_usage_totals[1],
            },
            "near_misses": list(self.near_misses),
        }


def _ratio(numerator: int, denominator: int) -> float:
    # 0/0 is defined as 1: an empty run against empty gold is perfect.
    if denominator == 0:
        return 1.0
    return numerator / denominator


def _norm(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


def _hint_matches(hint: str, declaration: str) -> bool:
    return _norm(hint) in _norm(declaration)


def score_run(
    formal_rules: Sequence[dict],
    gold: GoldAnnotation,
    doc_id: str,
    entity_declarations: dict[str, str],
    distinct_token_count: int = 0,
    token_usage_totals: tuple[int, int] = (0, 0),
) -> EvalReport:
    """Count TP/FP/FN for one run.

    ``formal_rules`` rows follow the formal_rules.json schema
    (entity_id, sentence, dsl, parse_ok); ``entity_declarations`` maps
    entity ids to their declaration lines so gold entity hints can match.
    Matching is greedy one-to-one in row order.
    """
    if gold.doc_id != doc_id:
        raise GoldMismatch(f"gold annotations are for {gold.doc_id!r}, not {doc_id!r}")

    claimed: set[int] = set()
    tp = fp = 0
    near_misses: list[str] = []

    def find_item(entity_id: str, sentence: str, casefold: bool = False) -> int | None:
        declaration = entity_declarations.get(entity_id, "")
        wanted = _norm(sentence).casefold() if casefold else _norm(sentence)
        for index, item in enumerate(gold.items):
            if index in claimed:
                continue
            got = _norm(item.sentence).casefold() if casefold else _norm(item.sentence)
            if got == wanted and _hint_matches(item.entity_hint, declaration):
                return index
        return None

    for row in formal_rules:
        if not row.get("parse_ok"):
            continue  # unformalized rules produce nothing; misses show up as FN
        index = find_item(row["entity_id"], row["sentence"])
        if index is None:
            if find_item(row["entity_id"], row["sentence"], casefold=True) is not None:
                near_misses.append(row["sentence"])
            fp += 1
            continue
        item = gold.items[index]
        claimed.add(index)
        if item.label == "rule" and item.override != "misformalized":
            tp += 1
        else:
            fp += 1

    fn = sum(
        1
        for index, item in enumerate(gold.items)
        if item.label == "rule" and (index not in claimed or item.override == "misformalized")
    )

    return EvalReport(
        tp=tp,
        fp=fp,
        fn=fn,
        precision=_ratio(tp, tp + fp),
        recall=_ratio(tp, tp + fn),
        distinct_token_count=distinct_token_count,
        token_usage_totals=token_usage_totals,
        near_misses=tuple(near_misses),
    )


def average_over_runs(reports: Sequence[EvalReport]) -> tuple[float, float]:
    if not reports:
        raise EmptyInput("cannot average zero reports")
    precision = sum(report.precision for report in reports) / len(reports)
    recall = sum(report.recall for report in reports) / len(reports)
    return precision, recall


def format_table(report: EvalReport) -> str:
    """One-row summary table: Precision, Recall, #Tokens."""
    header = f"{'Precision':>10}  {'Recall':>10}  {'#Tokens':>10}"
    row = f"{report.precision:>10.4f}  {report.recall:>10.4f}  {report.distinct_token_count:>10d}"
    counts = f"TP={report.tp} FP={report.fp} FN={report.fn}"
    return "\n".join([header, row, counts])
