"""Document-level answer decoding from per-instance logits.

A span (s, e) is scored by its log-odds against the [CLS] span,
``f_start(s) + f_end(e) - f_start(0) - f_end(0)``; the null span itself
scores 0. The best span over every window of a document becomes the short
answer, the top-level candidate containing it becomes the long answer, and
both share the span's score.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .corpus import Example, LongAnswerCandidate, Span
from .errors import AlignmentError, InputError, ParseError
from .instances import TrainingInstance
from .parallel import ordered_map
from .scorer import NUM_TYPES, LogitsRecord, softmax

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecodeConfig:
    max_answer_wp: int = 30
    top_k: int | None = 20  # None = exhaustive
    forbid_interior_markup: bool = False

    def __post_init__(self):
        if self.max_answer_wp < 1:
            raise InputError("max_answer_wp must be >= 1")
        if self.top_k is not None and self.top_k < 1:
            raise InputError("top_k must be >= 1 (or None for exhaustive search)")


@dataclass(frozen=True)
class SpanCandidate:
    instance: TrainingInstance | None
    s: int
    e: int
    g: float

    @property
    def is_null(self) -> bool:
        return self.s == 0 and self.e == 0

    def sort_key(self) -> tuple:
        """Smaller is better: higher g, then earlier doc position, then earlier window."""
        inst = self.instance
        if self.is_null or inst is None:
            return (-self.g, -1, -1, -1)
        off = inst.content_offset
        return (-self.g, inst.window_start + self.s - off, inst.window_start + self.e - off, inst.window_start)


@dataclass(frozen=True)
class Prediction:
    example_id: int
    short_span: Span | None
    long_span: Span | None
    score: float
    type_probs: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "short_answers": [] if self.short_span is None else [
                {"start_token": self.short_span[0], "end_token": self.short_span[1]}
            ],
            "long_answer": None if self.long_span is None else {
                "start_token": self.long_span[0], "end_token": self.long_span[1]
            },
            "score": self.score,
            "answer_type_probs": list(self.type_probs),
            "yes_no_answer": "NONE",
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "Prediction":
        try:
            shorts = rec["short_answers"]
            if len(shorts) > 1:
                raise ParseError("short_answers", "at most one short span is supported")
            short = (int(shorts[0]["start_token"]), int(shorts[0]["end_token"])) if shorts else None
            la = rec["long_answer"]
            long_ = None
            if la is not None and la.get("start_token", -1) >= 0:
                long_ = (int(la["start_token"]), int(la["end_token"]))
            probs = tuple(float(p) for p in rec.get("answer_type_probs", [0.0] * NUM_TYPES))
            return cls(int(rec["example_id"]), short, long_, float(rec["score"]), probs)
        except KeyError as exc:
            raise ParseError(exc.args[0], "missing field in prediction record") from None
        except (TypeError, ValueError, AttributeError) as exc:
            raise ParseError("<prediction>", str(exc)) from None


def g_score(start_logits: np.ndarray, end_logits: np.ndarray, s: int, e: int) -> float:
    # grouped so that g(0, 0) is exactly 0 and every caller rounds identically
    return float((start_logits[s] - start_logits[0]) + (end_logits[e] - end_logits[0]))


def _valid_positions(inst: TrainingInstance) -> np.ndarray:
    return np.flatnonzero(np.asarray(inst.wp_to_doc) >= 0)


def _top(logits: np.ndarray, positions: np.ndarray, k: int | None) -> np.ndarray:
    if k is None or len(positions) <= k:
        return positions
    # stable: higher logit first, lower position breaks ties
    order = np.lexsort((positions, -logits[positions]))
    return np.sort(positions[order[:k]])


def instance_best(inst: TrainingInstance, rec: LogitsRecord, config: DecodeConfig) -> SpanCandidate | None:
    """Best non-null span inside one instance, or None if it has no valid span."""
    start, end = rec.start_logits, rec.end_logits
    valid = _valid_positions(inst)
    if len(valid) == 0:
        return None
    starts = _top(start, valid, config.top_k)
    ends = _top(end, valid, config.top_k)
    markup_before = None
    if config.forbid_interior_markup:
        # count of non-content positions up to each index
        markup_before = np.cumsum(np.asarray(inst.wp_to_doc) < 0)

    # score matrix over the (start, end) grid, masked to valid pairs
    ss = starts[:, None]
    ee = ends[None, :]
    ok = (ee >= ss) & (ee - ss + 1 <= config.max_answer_wp)
    if markup_before is not None:
        ok &= markup_before[ee] == markup_before[ss]
    if not ok.any():
        return None
    g = (start[ss] - start[0]) + (end[ee] - end[0])
    g = np.where(ok, g, -np.inf)
    best = np.max(g)
    # among ties the row-major first pair has the lowest s, then the lowest e
    i, j = np.argwhere(g == best)[0]
    s, e = int(starts[i]), int(ends[j])
    return SpanCandidate(inst, s, e, g_score(start, end, s, e))


def best_span(
    pairs: Sequence[tuple[TrainingInstance, LogitsRecord]],
    config: DecodeConfig = DecodeConfig(),
) -> SpanCandidate:
    """Highest-g span across all windows of one document; the null span (g = 0) wins ties."""
    if not pairs:
        raise InputError("best_span needs at least one instance")
    for inst, rec in pairs:
        if len(rec.start_logits) != len(inst):
            raise AlignmentError(
                f"logits length {len(rec.start_logits)} != instance length {len(inst)} for {inst.key}"
            )
    best = SpanCandidate(pairs[0][0], 0, 0, 0.0)
    for inst, rec in pairs:
        cand = instance_best(inst, rec, config)
        if cand is not None and cand.g > 0 and cand.sort_key() < best.sort_key():
            best = cand
    return best


def to_doc_span(candidate: SpanCandidate) -> Span:
    inst = candidate.instance
    a, b = inst.wp_to_doc[candidate.s], inst.wp_to_doc[candidate.e]
    if a < 0 or b < 0:
        raise InputError(f"span ({candidate.s}, {candidate.e}) touches a non-content position")
    return (a, b + 1)


def select_long_answer(doc_span: Span | None, candidates: Iterable[LongAnswerCandidate]) -> LongAnswerCandidate | None:
    if doc_span is None:
        return None
    containing = [
        c for c in candidates
        if c.top_level and c.start_token <= doc_span[0] and doc_span[1] <= c.end_token
    ]
    if not containing:
        return None
    return min(containing, key=lambda c: (c.end_token - c.start_token, c.start_token))


def decode_example(
    example: Example,
    pairs: Sequence[tuple[TrainingInstance, LogitsRecord]],
    config: DecodeConfig = DecodeConfig(),
) -> Prediction:
    if not pairs:
        # nothing to read (e.g. an all-markup document)
        probs = (0.0,) * (NUM_TYPES - 1) + (1.0,)
        return Prediction(example.example_id, None, None, 0.0, probs)
    cand = best_span(pairs, config)
    rec = next(r for i, r in pairs if i is cand.instance)
    probs = tuple(float(p) for p in softmax(rec.type_logits))
    if cand.is_null:
        return Prediction(example.example_id, None, None, 0.0, probs)
    short = to_doc_span(cand)
    long_ = select_long_answer(short, example.candidates)
    return Prediction(example.example_id, short, None if long_ is None else long_.span, cand.g, probs)


def _group(
    examples: Iterable[Example],
    pairs: Iterable[tuple[TrainingInstance, LogitsRecord]],
) -> Iterator[tuple[Example, list[tuple[TrainingInstance, LogitsRecord]]]]:
    it = iter(pairs)
    pending = next(it, None)
    for ex in examples:
        group = []
        while pending is not None and pending[0].example_id == ex.example_id:
            group.append(pending)
            pending = next(it, None)
        yield ex, group
    if pending is not None:
        raise AlignmentError(f"instance for example {pending[0].example_id} does not follow the corpus order")


def align(instances: Iterable[TrainingInstance], logits: Iterable[LogitsRecord]) -> Iterator[tuple[TrainingInstance, LogitsRecord]]:
    """Zip instances with logits, insisting they agree on (example_id, window_start)."""
    sentinel = object()
    it_l = iter(logits)
    for inst in instances:
        rec = next(it_l, sentinel)
        if rec is sentinel:
            raise AlignmentError(f"no logits record for instance {inst.key}")
        if rec.key != inst.key:
            raise AlignmentError(f"instance {inst.key} is paired with logits {rec.key}")
        yield inst, rec
    extra = next(it_l, sentinel)
    if extra is not sentinel:
        raise AlignmentError(f"logits record {extra.key} has no instance")


def decode_corpus(
    instances: Iterable[TrainingInstance],
    logits: Iterable[LogitsRecord],
    corpus: Iterable[Example],
    config: DecodeConfig = DecodeConfig(),
    threads: int = 1,
) -> Iterator[Prediction]:
    """One prediction per corpus example, in corpus order.

    Instances and logits must be in the same order as the corpus, which is
    what ``preprocess --mode infer`` followed by ``score`` produces.
    """
    groups = _group(corpus, align(instances, logits))
    yield from ordered_map(lambda item: decode_example(item[0], item[1], config), groups, threads)
