"""NQ-simplified records: data model, parsing, canonical serialization, validation.

One record per line::

    {"example_id": 1, "question_text": "...", "document_text": "<P> a b </P>",
     "long_answer_candidates": [{"start_token": 0, "end_token": 4, "top_level": true}],
     "annotations": [{"long_answer": {"start_token": 0, "end_token": 4},
                      "short_answers": [{"start_token": 1, "end_token": 2}],
                      "yes_no_answer": "NONE"}]}

A null long answer is written ``{"start_token": -1, "end_token": -1}``.
Unknown fields (``annotation_id``, ``document_url``...) are ignored.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import ParseError, ValidationError
from .records import dumps, iter_lines

Span = tuple[int, int]  # (start_token inclusive, end_token exclusive)


class YesNo(enum.Enum):
    NONE = "NONE"
    YES = "YES"
    NO = "NO"


def is_html_token(text: str) -> bool:
    return len(text) >= 2 and text[0] == "<" and text[-1] == ">" and not any(c.isspace() for c in text)


@dataclass(frozen=True)
class DocToken:
    text: str
    index: int

    @property
    def is_html(self) -> bool:
        return is_html_token(self.text)


@dataclass(frozen=True)
class LongAnswerCandidate:
    start_token: int
    end_token: int
    top_level: bool

    @property
    def span(self) -> Span:
        return (self.start_token, self.end_token)


@dataclass(frozen=True)
class Annotation:
    long_span: Span | None = None
    short_spans: tuple[Span, ...] = ()
    yes_no: YesNo = YesNo.NONE

    @property
    def is_null(self) -> bool:
        return self.long_span is None and not self.short_spans and self.yes_no is YesNo.NONE

    @property
    def has_short(self) -> bool:
        """Non-null for the short-answer task: spans or a yes/no."""
        return bool(self.short_spans) or self.yes_no is not YesNo.NONE


@dataclass(frozen=True)
class Example:
    example_id: int
    question_text: str
    doc_tokens: tuple[DocToken, ...]
    candidates: tuple[LongAnswerCandidate, ...]
    annotations: tuple[Annotation, ...]

    @property
    def num_tokens(self) -> int:
        return len(self.doc_tokens)

    @property
    def document_text(self) -> str:
        return " ".join(t.text for t in self.doc_tokens)


# --------------------------------------------------------------------------
# parsing

def _require(obj: dict, key: str, kind: type | tuple[type, ...], path: str) -> Any:
    if key not in obj:
        raise ParseError(f"{path}{key}", "missing field")
    value = obj[key]
    # bool is an int subclass; never accept it where an integer is wanted
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ParseError(f"{path}{key}", f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
    return value


def _span(obj: Any, path: str) -> tuple[int, int]:
    if not isinstance(obj, dict):
        raise ParseError(path, "expected an object with start_token/end_token")
    return (_require(obj, "start_token", int, path + "."), _require(obj, "end_token", int, path + "."))


def _check_in_doc(span: Span, n: int, path: str, example_id: int) -> None:
    start, end = span
    if not (0 <= start < end <= n):
        raise ValidationError(f"{path} span [{start}, {end}) outside document of {n} tokens", example_id)


def example_from_dict(rec: Any) -> Example:
    if not isinstance(rec, dict):
        raise ParseError("<record>", "expected a JSON object")
    example_id = _require(rec, "example_id", int, "")
    question = _require(rec, "question_text", str, "")
    text = _require(rec, "document_text", str, "")
    if text == "":
        raise ValidationError("empty document", example_id)
    pieces = text.split(" ")
    for i, piece in enumerate(pieces):
        if piece == "":
            raise ValidationError(f"document_text has an empty token at position {i}", example_id)
    tokens = tuple(DocToken(t, i) for i, t in enumerate(pieces))
    n = len(tokens)

    candidates = []
    for i, c in enumerate(_require(rec, "long_answer_candidates", list, "")):
        path = f"long_answer_candidates[{i}]"
        span = _span(c, path)
        _check_in_doc(span, n, path, example_id)
        top = _require(c, "top_level", bool, path + ".")
        candidates.append(LongAnswerCandidate(span[0], span[1], top))

    annotations = []
    for i, a in enumerate(_require(rec, "annotations", list, "")):
        path = f"annotations[{i}]"
        if not isinstance(a, dict):
            raise ParseError(path, "expected an object")
        long_span: Span | None = _span(_require(a, "long_answer", dict, path + "."), path + ".long_answer")
        if long_span == (-1, -1):
            long_span = None
        else:
            _check_in_doc(long_span, n, path + ".long_answer", example_id)
        shorts = []
        for j, s in enumerate(_require(a, "short_answers", list, path + ".")):
            spath = f"{path}.short_answers[{j}]"
            span = _span(s, spath)
            _check_in_doc(span, n, spath, example_id)
            shorts.append(span)
        yn_raw = _require(a, "yes_no_answer", str, path + ".")
        try:
            yes_no = YesNo(yn_raw)
        except ValueError:
            raise ParseError(path + ".yes_no_answer", f"expected NONE, YES or NO, got {yn_raw!r}") from None
        annotations.append(Annotation(long_span, tuple(shorts), yes_no))

    return Example(example_id, question, tokens, tuple(candidates), tuple(annotations))


def parse_example(line: str) -> Example:
    """Parse one JSON line into an :class:`Example`."""
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError("<record>", f"invalid JSON: {exc.msg}") from exc
    return example_from_dict(rec)


def example_to_dict(ex: Example) -> dict:
    def span_dict(span: Span | None) -> dict:
        start, end = span if span is not None else (-1, -1)
        return {"start_token": start, "end_token": end}

    return {
        "example_id": ex.example_id,
        "question_text": ex.question_text,
        "document_text": ex.document_text,
        "long_answer_candidates": [
            {"start_token": c.start_token, "end_token": c.end_token, "top_level": c.top_level}
            for c in ex.candidates
        ],
        "annotations": [
            {
                "long_answer": span_dict(a.long_span),
                "short_answers": [span_dict(s) for s in a.short_spans],
                "yes_no_answer": a.yes_no.value,
            }
            for a in ex.annotations
        ],
    }


def serialize_example(ex: Example) -> str:
    """Canonical single-line form; ``parse_example`` inverts it exactly."""
    return dumps(example_to_dict(ex))


def iter_examples(path: str | Path) -> Iterator[Example]:
    """Stream examples one line at a time, tagging errors with the line number."""
    for lineno, line in iter_lines(path):
        try:
            ex = parse_example(line)
        except (ParseError, ValidationError) as exc:
            exc.line = lineno
            raise
        yield ex


# --------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Violation:
    example_id: int | None
    field: str
    message: str

    def to_dict(self) -> dict:
        return {"example_id": self.example_id, "field": self.field, "message": self.message}


def _contains(outer: Span, inner: Span) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def example_violations(ex: Example) -> list[Violation]:
    out = []
    eid = ex.example_id
    n = ex.num_tokens
    for i, t in enumerate(ex.doc_tokens):
        if t.index != i:
            out.append(Violation(eid, f"doc_tokens[{i}].index", f"expected {i}, got {t.index}"))
    for i, c in enumerate(ex.candidates):
        if not (0 <= c.start_token < c.end_token <= n):
            out.append(Violation(eid, f"long_answer_candidates[{i}]", "span outside document"))
    if not ex.annotations:
        out.append(Violation(eid, "annotations", "no annotations"))
    cand_spans = {c.span for c in ex.candidates}
    for i, a in enumerate(ex.annotations):
        path = f"annotations[{i}]"
        spans = ([a.long_span] if a.long_span else []) + list(a.short_spans)
        for span in spans:
            if not (0 <= span[0] < span[1] <= n):
                out.append(Violation(eid, path, f"span {list(span)} outside document"))
        if a.long_span is not None and a.long_span not in cand_spans:
            out.append(Violation(eid, path + ".long_answer", f"span {list(a.long_span)} matches no candidate"))
        if a.short_spans and a.long_span is None:
            out.append(Violation(eid, path + ".short_answers", "short answers without a long answer"))
        if a.yes_no is not YesNo.NONE and a.short_spans:
            out.append(Violation(eid, path + ".yes_no_answer", "yes/no answer together with short spans"))
        if a.long_span is not None:
            for j, s in enumerate(a.short_spans):
                if not _contains(a.long_span, s):
                    out.append(Violation(eid, f"{path}.short_answers[{j}]", "short span outside long answer"))
    return out


def validate_corpus(examples: Iterable[Example]) -> list[Violation]:
    """Collect every invariant violation; an empty list means the corpus is clean."""
    out: list[Violation] = []
    first_seen: dict[int, int] = {}
    for record, ex in enumerate(examples):
        if ex.example_id in first_seen:
            out.append(Violation(
                ex.example_id, "example_id",
                f"duplicate example_id in records {first_seen[ex.example_id]} and {record}",
            ))
        else:
            first_seen[ex.example_id] = record
        out.extend(example_violations(ex))
    return out
