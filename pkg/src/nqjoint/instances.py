"""Sliding-window instance generation, target labelling and null downsampling.

Each instance is laid out as ``[CLS] question [SEP] window [SEP]``. Windows
start at every multiple of ``stride`` doc wordpieces until one reaches the
last wordpiece of the document.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .corpus import Annotation, Example, Span, YesNo
from .errors import ConfigError, InputError, ParseError
from .hashing import MASK64, splitmix64
from .parallel import ordered_map
from .tokenizer import TokenizedDoc, TokenizerConfig, Vocab, tokenize_document, tokenize_text


class AnswerType(enum.IntEnum):
    SHORT = 0
    LONG = 1
    YES = 2
    NO = 3
    NO_ANSWER = 4


@dataclass(frozen=True)
class GenConfig:
    max_seq_len: int = 512
    stride: int = 128
    max_question_wp: int = 64
    downsample_rate: int = 50
    seed: int = 0
    max_markup_index: int = 50

    def __post_init__(self):
        if self.stride < 1 or self.stride > self.max_seq_len:
            raise ConfigError(f"stride must be in [1, max_seq_len], got {self.stride}")
        if self.downsample_rate < 1:
            raise ConfigError(f"downsample_rate must be >= 1, got {self.downsample_rate}")
        if self.max_question_wp < 0:
            raise ConfigError("max_question_wp must be >= 0")
        if self.max_seq_len - self.max_question_wp - 3 < self.stride:
            raise ConfigError(
                f"window capacity {self.max_seq_len - self.max_question_wp - 3} is smaller than "
                f"stride {self.stride}; windows would leave gaps"
            )

    @property
    def tokenizer(self) -> TokenizerConfig:
        return TokenizerConfig(max_markup_index=self.max_markup_index)


@dataclass(frozen=True)
class Window:
    start: int  # offset into the document's wordpieces
    wp_ids: tuple[int, ...]
    wp_to_doc: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.wp_ids)

    def contains(self, wp_span: tuple[int, int] | None) -> bool:
        return wp_span is not None and self.start <= wp_span[0] and wp_span[1] < self.start + len(self.wp_ids)


@dataclass(frozen=True)
class TrainingInstance:
    example_id: int
    window_start: int
    input_ids: tuple[int, ...]
    wp_to_doc: tuple[int, ...]
    content_len: int
    target_start: int = 0
    target_end: int = 0
    answer_type: AnswerType = AnswerType.NO_ANSWER

    def __len__(self) -> int:
        return len(self.input_ids)

    @property
    def content_offset(self) -> int:
        """Position of the first window wordpiece within ``input_ids``."""
        return len(self.input_ids) - self.content_len - 1

    @property
    def key(self) -> tuple[int, int]:
        return (self.example_id, self.window_start)

    @property
    def is_null(self) -> bool:
        return self.answer_type is AnswerType.NO_ANSWER

    def to_dict(self) -> dict:
        return {
            "example_id": self.example_id,
            "window_start": self.window_start,
            "input_ids": list(self.input_ids),
            "wp_to_doc": list(self.wp_to_doc),
            "content_len": self.content_len,
            "target_start": self.target_start,
            "target_end": self.target_end,
            "answer_type": int(self.answer_type),
        }

    @classmethod
    def from_dict(cls, rec: dict) -> "TrainingInstance":
        try:
            inst = cls(
                example_id=int(rec["example_id"]),
                window_start=int(rec["window_start"]),
                input_ids=tuple(rec["input_ids"]),
                wp_to_doc=tuple(rec["wp_to_doc"]),
                content_len=int(rec["content_len"]),
                target_start=int(rec["target_start"]),
                target_end=int(rec["target_end"]),
                answer_type=AnswerType(rec["answer_type"]),
            )
        except KeyError as exc:
            raise ParseError(exc.args[0], "missing field in instance record") from None
        except (TypeError, ValueError) as exc:
            raise ParseError("<instance>", str(exc)) from None
        if len(inst.input_ids) != len(inst.wp_to_doc):
            raise ParseError("wp_to_doc", "length differs from input_ids")
        if not 0 <= inst.target_start <= inst.target_end < len(inst.input_ids):
            raise ParseError("target_start", "target span outside the instance")
        return inst


# --------------------------------------------------------------------------
# windows

def question_ids(text: str, vocab: Vocab, config: GenConfig) -> list[int]:
    return tokenize_text(text, vocab)[: config.max_question_wp]


def window_capacity(question_len: int, config: GenConfig) -> int:
    return config.max_seq_len - question_len - 3


def generate_windows(doc: TokenizedDoc, question_wp: Sequence[int], config: GenConfig) -> list[Window]:
    n = len(doc)
    capacity = window_capacity(len(question_wp), config)
    if capacity < config.stride:
        raise ConfigError(f"question of {len(question_wp)} wordpieces leaves capacity {capacity} < stride")
    windows = []
    start = 0
    while start < n:
        end = min(start + capacity, n)
        windows.append(Window(start, doc.wp_ids[start:end], doc.wp_to_doc[start:end]))
        if end == n:
            break
        start += config.stride
    return windows


def build_instance(example_id: int, window: Window, question_wp: Sequence[int], vocab: Vocab) -> TrainingInstance:
    q = tuple(question_wp)
    input_ids = (vocab.cls_id,) + q + (vocab.sep_id,) + window.wp_ids + (vocab.sep_id,)
    wp_to_doc = (-1,) * (len(q) + 2) + window.wp_to_doc + (-1,)
    return TrainingInstance(example_id, window.start, input_ids, wp_to_doc, len(window))


# --------------------------------------------------------------------------
# targets

@dataclass(frozen=True)
class WpAnnotation:
    """An annotation in doc-wordpiece coordinates, inclusive at both ends.

    A span is ``None`` when its tokens produced no wordpieces (all-HTML spans).
    """

    long_span: tuple[int, int] | None = None
    short_spans: tuple[tuple[int, int] | None, ...] = ()
    yes_no: YesNo = YesNo.NONE


class DocIndex:
    """Maps doc-token spans onto doc-wordpiece spans."""

    def __init__(self, doc: TokenizedDoc):
        self.positions = [p for p, j in enumerate(doc.wp_to_doc) if j >= 0]
        self.tokens = [doc.wp_to_doc[p] for p in self.positions]

    def wp_span(self, span: Span) -> tuple[int, int] | None:
        """First wordpiece of the first token in ``[start, end)`` to the last wordpiece of the last one."""
        start, end = span
        lo = bisect.bisect_left(self.tokens, start)
        hi = bisect.bisect_left(self.tokens, end) - 1
        if lo > hi:
            return None
        return (self.positions[lo], self.positions[hi])


def annotation_to_wp(annotation: Annotation, index: DocIndex) -> WpAnnotation:
    long_wp = index.wp_span(annotation.long_span) if annotation.long_span is not None else None
    shorts = tuple(index.wp_span(s) for s in annotation.short_spans)
    return WpAnnotation(long_wp, shorts, annotation.yes_no)


def assign_targets(window: Window, annotation: WpAnnotation, content_offset: int) -> tuple[int, int, AnswerType]:
    """Target ``(s, e, t)`` for one window, positions relative to the instance.

    Short spans win only when every one of them is fully inside the window.
    Otherwise a fully contained long span yields YES/NO (when annotated) or
    LONG; anything else points at [CLS].
    """

    def pos(wp: int) -> int:
        return content_offset + wp - window.start

    shorts = annotation.short_spans
    if shorts and all(window.contains(s) for s in shorts):
        return pos(min(s[0] for s in shorts)), pos(max(s[1] for s in shorts)), AnswerType.SHORT
    if window.contains(annotation.long_span):
        s, e = pos(annotation.long_span[0]), pos(annotation.long_span[1])
        if annotation.yes_no is YesNo.YES:
            return s, e, AnswerType.YES
        if annotation.yes_no is YesNo.NO:
            return s, e, AnswerType.NO
        return s, e, AnswerType.LONG
    return 0, 0, AnswerType.NO_ANSWER


# --------------------------------------------------------------------------
# downsampling

def keep_null(example_id: int, window_start: int, config: GenConfig) -> bool:
    h = splitmix64((config.seed ^ example_id ^ window_start) & MASK64)
    return h % config.downsample_rate == 0


def downsample(instances: Iterable[TrainingInstance], config: GenConfig) -> list[TrainingInstance]:
    """Keep every non-null instance and a hash-selected 1/rate of the null ones."""
    if config.downsample_rate == 1:
        return list(instances)
    return [i for i in instances if not i.is_null or keep_null(i.example_id, i.window_start, config)]


# --------------------------------------------------------------------------
# corpus

def instances_for_example(example: Example, vocab: Vocab, config: GenConfig, mode: str = "train") -> list[TrainingInstance]:
    if mode not in ("train", "infer"):
        raise ConfigError(f"mode must be 'train' or 'infer', got {mode!r}")
    doc = tokenize_document(example, vocab, config.tokenizer)
    q = question_ids(example.question_text, vocab, config)
    windows = generate_windows(doc, q, config)
    out = [build_instance(example.example_id, w, q, vocab) for w in windows]
    if mode == "infer":
        return out
    if not example.annotations:
        raise InputError(f"example {example.example_id}: training requires an annotation")
    target = annotation_to_wp(example.annotations[0], DocIndex(doc))
    labelled = []
    for w, inst in zip(windows, out):
        s, e, t = assign_targets(w, target, inst.content_offset)
        labelled.append(TrainingInstance(
            inst.example_id, inst.window_start, inst.input_ids, inst.wp_to_doc, inst.content_len, s, e, t,
        ))
    return downsample(labelled, config)


def preprocess_corpus(
    examples: Iterable[Example],
    vocab: Vocab,
    config: GenConfig,
    mode: str = "train",
    threads: int = 1,
) -> Iterator[TrainingInstance]:
    """Stream instances for a corpus; output order is input order whatever ``threads`` is."""

    def work(ex: Example) -> list[TrainingInstance]:
        return instances_for_example(ex, vocab, config, mode)

    for batch in ordered_map(work, examples, threads):
        yield from batch
