"""Wordpiece tokenization with atomic structure markup.

Documents are tokenized token-by-token so that every wordpiece keeps the
index of the document token it came from. HTML tokens never become
content: structure openers (``<P>``, ``<Table>``, ``<Ul>``/``<Ol>``/``<Dl>``)
are replaced by a single ``[Paragraph=N]`` / ``[Table=N]`` / ``[List=N]``
piece, and every other tag is dropped.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Example, is_html_token
from .errors import ConfigError

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
MARKUP_KINDS = ("Paragraph", "Table", "List")
REQUIRED_TOKENS = (PAD, UNK, CLS, SEP) + tuple(f"[{k}]" for k in MARKUP_KINDS)
_NUMBERED_MARKUP = re.compile(r"\[(?:Paragraph|Table|List)=\d+\]")
CONTINUATION = "##"
MAX_WORD_CHARS = 100
_CACHE_LIMIT = 1 << 20

STRUCTURE_OPENERS = {
    "<p>": "Paragraph",
    "<table>": "Table",
    "<ul>": "List",
    "<ol>": "List",
    "<dl>": "List",
}


def markup_token(kind: str, n: int | None = None) -> str:
    return f"[{kind}]" if n is None else f"[{kind}={n}]"


class Vocab:
    """Immutable token <-> id table; id is the 0-based line number of the vocab file."""

    def __init__(self, entries: Sequence[str]):
        id_of: dict[str, int] = {}
        for i, tok in enumerate(entries):
            if tok == "":
                raise ConfigError(f"vocab line {i + 1} is empty")
            if tok in id_of:
                raise ConfigError(f"duplicate vocab token {tok!r} at lines {id_of[tok] + 1} and {i + 1}")
            id_of[tok] = i
        missing = [t for t in REQUIRED_TOKENS if t not in id_of]
        if missing:
            raise ConfigError(f"vocab is missing required special tokens: {', '.join(missing)}")
        self.entries = tuple(entries)
        self.id_of = id_of
        self.markup_ids = {
            tok: i for tok, i in id_of.items() if tok in REQUIRED_TOKENS or _NUMBERED_MARKUP.fullmatch(tok)
        }
        self.pad_id = id_of[PAD]
        self.unk_id = id_of[UNK]
        self.cls_id = id_of[CLS]
        self.sep_id = id_of[SEP]
        self._cache: dict[str, tuple[int, ...]] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, tok: str) -> bool:
        return tok in self.id_of

    def tokenize_word(self, text: str) -> tuple[int, ...]:
        """Ids for one whitespace-free token: atomic if special, else normalized wordpiece."""
        hit = self._cache.get(text)
        if hit is None:
            if text in self.markup_ids:
                hit = (self.markup_ids[text],)
            else:
                norm = normalize(text)
                hit = tuple(wordpiece(norm, self)) if norm else (self.unk_id,)
            if len(self._cache) >= _CACHE_LIMIT:
                self._cache.clear()
            self._cache[text] = hit
        return hit


def load_vocab(path: str | Path) -> Vocab:
    with open(path, "r", encoding="utf-8") as f:
        entries = [line.rstrip("\r\n") for line in f]
    # a trailing newline on the last line is not an extra entry
    while entries and entries[-1] == "":
        entries.pop()
    return Vocab(entries)


def vocab_entries(words: Iterable[str], max_markup_index: int = 50) -> list[str]:
    """Specials first, then ``words``, then the reserved markup block at the end."""
    entries = [PAD, UNK, CLS, SEP]
    seen = set(entries)
    for w in words:
        if w not in seen:
            entries.append(w)
            seen.add(w)
    entries += [markup_token(k) for k in MARKUP_KINDS]
    for kind in MARKUP_KINDS:
        entries += [markup_token(kind, n) for n in range(1, max_markup_index + 1)]
    return entries


def write_vocab(path: str | Path, entries: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for tok in entries:
            f.write(tok + "\n")


def normalize(text: str) -> str:
    """Lowercase and strip combining accents."""
    text = unicodedata.normalize("NFD", text.lower())
    return "".join(c for c in text if unicodedata.category(c) != "Mn")


def wordpiece(token_text: str, vocab: Vocab) -> list[int]:
    """Greedy longest-match-first split; any unmatched remainder maps the whole token to [UNK]."""
    if len(token_text) > MAX_WORD_CHARS:
        return [vocab.unk_id]
    ids = []
    start = 0
    n = len(token_text)
    while start < n:
        end = n
        cur = None
        while start < end:
            piece = token_text[start:end]
            if start > 0:
                piece = CONTINUATION + piece
            cur = vocab.id_of.get(piece)
            if cur is not None:
                break
            end -= 1
        if cur is None:
            return [vocab.unk_id]
        ids.append(cur)
        start = end
    return ids


def tokenize_text(text: str, vocab: Vocab) -> list[int]:
    """Whitespace-split ``text`` and wordpiece each token (used for questions)."""
    out: list[int] = []
    for tok in text.split():
        out.extend(vocab.tokenize_word(tok))
    return out


@dataclass(frozen=True)
class TokenizerConfig:
    max_markup_index: int = 50


@dataclass(frozen=True)
class TokenizedDoc:
    wp_ids: tuple[int, ...]
    wp_to_doc: tuple[int, ...]  # -1 for inserted markup
    markup_count: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.wp_ids)

    def token_spans(self) -> dict[int, tuple[int, int]]:
        """doc-token index -> (first wp, last wp) for tokens that produced wordpieces."""
        spans: dict[int, tuple[int, int]] = {}
        for pos, j in enumerate(self.wp_to_doc):
            if j >= 0:
                first = spans.get(j)
                spans[j] = (pos, pos) if first is None else (first[0], pos)
        return spans


def tokenize_document(example: Example, vocab: Vocab, config: TokenizerConfig = TokenizerConfig()) -> TokenizedDoc:
    wp_ids: list[int] = []
    wp_to_doc: list[int] = []
    counts = {k: 0 for k in MARKUP_KINDS}
    for tok in example.doc_tokens:
        if is_html_token(tok.text):
            kind = STRUCTURE_OPENERS.get(tok.text.lower())
            if kind is None:
                continue
            counts[kind] += 1
            n = counts[kind]
            name = markup_token(kind, n) if n <= config.max_markup_index else markup_token(kind)
            # numbered entries beyond what the vocab reserves fall back to the bare form
            wp_ids.append(vocab.id_of.get(name, vocab.id_of[markup_token(kind)]))
            wp_to_doc.append(-1)
            continue
        for piece in vocab.tokenize_word(tok.text):
            wp_ids.append(piece)
            wp_to_doc.append(tok.index)
    return TokenizedDoc(tuple(wp_ids), tuple(wp_to_doc), counts)
