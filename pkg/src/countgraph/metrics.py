"""VQA answer accuracy, the "how many" Count subset, and balanced-pair accuracy."""

from __future__ import annotations

import json
import re
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

NUM_HUMAN_ANSWERS = 10
CATEGORIES = ("Number", "Count", "All")

_WS = re.compile(r"\s+")


class MissingPredictionError(KeyError):
    def __init__(self, question_id) -> None:
        super().__init__(question_id)
        self.question_id = question_id

    def __str__(self) -> str:
        return f"no prediction for question_id {self.question_id!r}"


@dataclass(frozen=True)
class AnnotatedQuestion:
    question_id: object
    question_text: str
    human_answers: tuple[str, ...]
    pair_id: object = None
    answer_type: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "human_answers", tuple(self.human_answers))
        if len(self.human_answers) != NUM_HUMAN_ANSWERS:
            raise ValueError(
                f"question {self.question_id!r} has {len(self.human_answers)} answers, "
                f"expected {NUM_HUMAN_ANSWERS}"
            )

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotatedQuestion":
        return cls(
            question_id=obj["question_id"],
            question_text=obj["question"],
            human_answers=tuple(obj["answers"]),
            pair_id=obj.get("pair_id"),
            answer_type=obj.get("answer_type"),
        )


def normalize_answer(text: str) -> str:
    return _WS.sub(" ", text.strip().lower())


def vqa_accuracy(predicted: str, human_answers: Sequence[str]) -> float:
    pred = normalize_answer(predicted)
    matches = sum(normalize_answer(a) == pred for a in human_answers)
    return min(matches / 3.0, 1.0)


def is_count_question(question_text: str) -> bool:
    return question_text.lstrip().lower().startswith("how many")


def _is_numeric(answer: str) -> bool:
    try:
        float(normalize_answer(answer))
    except ValueError:
        return False
    return True


def is_number_question(q: AnnotatedQuestion) -> bool:
    """VQA "number" answer type, explicit or inferred from the majority human answer.

    Count questions always belong here so that Count is a subset of Number.
    """
    if is_count_question(q.question_text):
        return True
    if q.answer_type is not None:
        return q.answer_type == "number"
    majority, _ = Counter(normalize_answer(a) for a in q.human_answers).most_common(1)[0]
    return _is_numeric(majority)


def in_category(q: AnnotatedQuestion, category: str) -> bool:
    if category == "All":
        return True
    if category == "Number":
        return is_number_question(q)
    if category == "Count":
        return is_count_question(q.question_text)
    raise ValueError(f"unknown category {category!r}")


def _prediction(predictions: Mapping, qid) -> str:
    try:
        return predictions[qid]
    except KeyError:
        raise MissingPredictionError(qid) from None


def balanced_pairs(annotations: Iterable[AnnotatedQuestion]) -> list[tuple[AnnotatedQuestion, AnnotatedQuestion]]:
    groups: dict[object, list[AnnotatedQuestion]] = {}
    for q in annotations:
        if q.pair_id is not None:
            groups.setdefault(q.pair_id, []).append(q)
    pairs = []
    for pid, members in groups.items():
        if len(members) != 2:
            raise ValueError(f"pair_id {pid!r} links {len(members)} questions, expected 2")
        pairs.append((members[0], members[1]))
    return pairs


def balanced_pair_accuracy(
    predictions: Mapping[object, str], annotations: Iterable[AnnotatedQuestion]
) -> float:
    """Fraction of pairs where both questions get full credit (accuracy 1.0)."""
    pairs = balanced_pairs(annotations)
    if not pairs:
        warnings.warn("no balanced pairs to score; reporting 0", RuntimeWarning, stacklevel=2)
        return 0.0
    hits = 0
    for q1, q2 in pairs:
        ok1 = vqa_accuracy(_prediction(predictions, q1.question_id), q1.human_answers) >= 1.0
        ok2 = vqa_accuracy(_prediction(predictions, q2.question_id), q2.human_answers) >= 1.0
        hits += ok1 and ok2
    return hits / len(pairs)


def category_report(
    predictions: Mapping[object, str], annotations: Sequence[AnnotatedQuestion]
) -> dict[str, dict[str, float | int]]:
    """Mean VQA accuracy and balanced-pair accuracy per category.

    A pair belongs to a category when both of its questions do.  Categories
    with no questions report 0.
    """
    report = {}
    for cat in CATEGORIES:
        members = [q for q in annotations if in_category(q, cat)]
        scores = [vqa_accuracy(_prediction(predictions, q.question_id), q.human_answers) for q in members]
        pairs = [p for p in balanced_pairs(annotations) if in_category(p[0], cat) and in_category(p[1], cat)]
        if pairs:
            flat = [q for pair in pairs for q in pair]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                pair_acc = balanced_pair_accuracy(predictions, flat)
        else:
            pair_acc = 0.0
        report[cat] = {
            "questions": len(members),
            "accuracy": sum(scores) / len(scores) if scores else 0.0,
            "pairs": len(pairs),
            "pair_accuracy": pair_acc,
        }
    return report


def _read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc


def load_annotations(path: str | Path) -> list[AnnotatedQuestion]:
    out = []
    for lineno, obj in _read_jsonl(path):
        try:
            out.append(AnnotatedQuestion.from_json(obj))
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad annotation: {exc}") from exc
    return out


def load_predictions(path: str | Path) -> dict[object, str]:
    out = {}
    for lineno, obj in _read_jsonl(path):
        try:
            out[obj["question_id"]] = str(obj["answer"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad prediction: {exc}") from exc
    return out


def format_table(report: Mapping[str, Mapping[str, float | int]]) -> str:
    lines = [f"{'category':<10}{'questions':>10}{'accuracy':>12}{'pairs':>8}{'pair_acc':>12}"]
    for cat in CATEGORIES:
        r = report[cat]
        lines.append(
            f"{cat:<10}{r['questions']:>10d}{r['accuracy']:>12.6f}{r['pairs']:>8d}{r['pair_accuracy']:>12.6f}"
        )
    return "\n".join(lines)
