"""Threshold-swept precision / recall / F1 against multi-annotator gold.

Long and short answers are scored as separate tasks from the same shared
prediction score. A prediction counts as answered at threshold ``tau`` when
it has an answer for the task and ``score >= tau``; the reported threshold is
the one with the best F1 over every distinct observed score plus ``+inf``.
Matching is exact: a long span must equal some annotator's long span, a
short-span set must equal some annotator's short-span set.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Example, YesNo, iter_examples
from .decoder import Prediction
from .errors import InputError
from .records import read_jsonl

log = logging.getLogger(__name__)


class Task(str, enum.Enum):
    LONG = "long"
    SHORT = "short"


def default_min_annotators(example: Example) -> int:
    return 2 if len(example.annotations) >= 5 else 1


def gold_label(example: Example, task: Task, min_annotators: int | None = None) -> list | None:
    """Per-annotator gold answers, or None if too few annotators gave one.

    Long-task entries are ``(start, end)`` spans; short-task entries are a
    ``frozenset`` of spans or a ``YesNo`` value.
    """
    k = default_min_annotators(example) if min_annotators is None else min_annotators
    answers: list = []
    for a in example.annotations:
        if task is Task.LONG:
            if a.long_span is not None:
                answers.append(a.long_span)
        elif a.yes_no is not YesNo.NONE:
            answers.append(a.yes_no)
        elif a.short_spans:
            answers.append(frozenset(a.short_spans))
    return answers if len(answers) >= max(k, 1) else None


def predicted_answer(pred: Prediction, task: Task):
    if task is Task.LONG:
        return pred.long_span
    return frozenset([pred.short_span]) if pred.short_span is not None else None


def match(pred: Prediction, gold: Sequence, task: Task) -> bool:
    answer = predicted_answer(pred, task)
    return answer is not None and any(answer == g for g in gold)


@dataclass(frozen=True)
class SweepPoint:
    threshold: float
    precision: float
    recall: float
    f1: float
    true_positives: int
    predicted: int


@dataclass
class TaskReport:
    task: str
    best_threshold: float
    precision: float
    recall: float
    f1: float
    true_positives: int
    predicted_non_null: int
    gold_non_null: int
    recall_undefined: bool = False
    curve: list[SweepPoint] = field(default_factory=list)

    def to_dict(self, with_curve: bool = False) -> dict:
        out = {
            "best_threshold": _json_threshold(self.best_threshold),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "true_positives": self.true_positives,
            "predicted_non_null": self.predicted_non_null,
            "gold_non_null": self.gold_non_null,
            "recall_undefined": self.recall_undefined,
        }
        if with_curve:
            out["curve"] = [
                {"threshold": _json_threshold(p.threshold), "precision": p.precision, "recall": p.recall,
                 "f1": p.f1, "true_positives": p.true_positives, "predicted": p.predicted}
                for p in self.curve
            ]
        return out


def _json_threshold(t: float):
    # +inf (nothing answered) has no strict-JSON form
    return None if math.isinf(t) else t


@dataclass
class EvalReport:
    long: TaskReport
    short: TaskReport
    num_examples: int
    missing_predictions: int = 0

    def to_dict(self, with_curve: bool = False) -> dict:
        return {
            "num_examples": self.num_examples,
            "missing_predictions": self.missing_predictions,
            "long": self.long.to_dict(with_curve),
            "short": self.short.to_dict(with_curve),
        }

    def summary(self) -> str:
        lines = [f"examples: {self.num_examples}"]
        for r in (self.long, self.short):
            lines.append(
                f"{r.task:>5}  P={r.precision:.4f} R={r.recall:.4f} F1={r.f1:.4f}  "
                f"threshold={r.best_threshold:.6g}  tp={r.true_positives} "
                f"pred={r.predicted_non_null} gold={r.gold_non_null}"
                + ("  (no gold answers: recall undefined)" if r.recall_undefined else "")
            )
        return "\n".join(lines)


def prf(tp: int, predicted: int, gold: int) -> tuple[float, float, float]:
    p = tp / predicted if predicted else 0.0
    r = tp / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def sweep(
    predictions: Sequence[Prediction],
    examples: Sequence[Example],
    task: Task | str,
    min_annotators: int | None = None,
) -> TaskReport:
    """Best-F1 threshold for one task; ``predictions[i]`` belongs to ``examples[i]``."""
    task = Task(task)
    if len(predictions) != len(examples):
        raise InputError("sweep needs exactly one prediction per example")
    gold_nn = 0
    answered = []  # (score, is_match) for predictions with an answer for this task
    for pred, ex in zip(predictions, examples):
        gold = gold_label(ex, task, min_annotators)
        if gold is not None:
            gold_nn += 1
        if predicted_answer(pred, task) is not None:
            answered.append((pred.score, gold is not None and match(pred, gold, task)))

    thresholds = sorted({p.score for p in predictions}, reverse=True)
    answered.sort(key=lambda x: -x[0])
    curve = [SweepPoint(math.inf, *prf(0, 0, gold_nn), 0, 0)]
    best = curve[0]
    tp = n = 0
    i = 0
    # walk thresholds from high to low; strict improvement keeps the highest threshold on ties
    for tau in thresholds:
        while i < len(answered) and answered[i][0] >= tau:
            n += 1
            tp += answered[i][1]
            i += 1
        point = SweepPoint(tau, *prf(tp, n, gold_nn), tp, n)
        curve.append(point)
        if point.f1 > best.f1:
            best = point
    return TaskReport(
        task=task.value,
        best_threshold=best.threshold,
        precision=best.precision,
        recall=best.recall,
        f1=best.f1,
        true_positives=best.true_positives,
        predicted_non_null=best.predicted,
        gold_non_null=gold_nn,
        recall_undefined=gold_nn == 0,
        curve=curve,
    )


def align_predictions(predictions: Iterable[Prediction], examples: Sequence[Example]) -> tuple[list[Prediction], int]:
    """Order predictions by corpus; missing ones become unanswered, duplicates are an error."""
    by_id: dict[int, Prediction] = {}
    for p in predictions:
        if p.example_id in by_id:
            raise InputError(f"duplicate prediction for example {p.example_id}")
        by_id[p.example_id] = p
    out = []
    missing = 0
    for ex in examples:
        p = by_id.pop(ex.example_id, None)
        if p is None:
            missing += 1
            log.warning("no prediction for example %d; counted as unanswered", ex.example_id)
            p = Prediction(ex.example_id, None, None, 0.0, ())
        out.append(p)
    for eid in by_id:
        log.warning("prediction for unknown example %d ignored", eid)
    return out, missing


def evaluate_examples(
    predictions: Iterable[Prediction],
    examples: Sequence[Example],
    min_annotators: int | None = None,
) -> EvalReport:
    preds, missing = align_predictions(predictions, examples)
    return EvalReport(
        long=sweep(preds, examples, Task.LONG, min_annotators),
        short=sweep(preds, examples, Task.SHORT, min_annotators),
        num_examples=len(examples),
        missing_predictions=missing,
    )


def read_predictions(path: str | Path) -> list[Prediction]:
    return [Prediction.from_dict(r) for r in read_jsonl(path)]


def evaluate(predictions_path: str | Path, corpus_path: str | Path, min_annotators: int | None = None) -> EvalReport:
    # only annotations matter here; drop document bodies as they stream past
    examples = [replace(ex, doc_tokens=(), candidates=()) for ex in iter_examples(corpus_path)]
    return evaluate_examples(read_predictions(predictions_path), examples, min_annotators)
