"""Line-delimited JSON files with an optional leading header record.

Every file this package writes starts with ``{"_header": {...}}`` carrying
the record kind and the run seed; readers skip that line transparently.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

HEADER_KEY = "_header"


def dumps(obj: Any) -> str:
    # compact and key-order preserving; float repr round-trips exactly
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def write_jsonl(path: str | Path, records: Iterable[dict], header: dict | None = None) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if header is not None:
            f.write(dumps({HEADER_KEY: header}) + "\n")
        for rec in records:
            f.write(dumps(rec) + "\n")
            n += 1
    return n


def iter_lines(path: str | Path) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, text)`` for non-blank lines, 1-based."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if line.strip():
                yield lineno, line


def read_jsonl(path: str | Path) -> Iterator[dict]:
    for lineno, line in iter_lines(path):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            from .errors import ParseError

            raise ParseError("<record>", f"invalid JSON in {path}: {exc.msg}", line=lineno) from exc
        if isinstance(rec, dict) and HEADER_KEY in rec:
            continue
        yield rec


def read_header(path: str | Path) -> dict | None:
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    try:
        rec = json.loads(first)
    except json.JSONDecodeError:
        return None
    if isinstance(rec, dict) and HEADER_KEY in rec:
        return rec[HEADER_KEY]
    return None
