"""Document ingestion, sliding windows, and line-range slices.

A document is a flat sequence of 1-based numbered lines. Windows and slices
render their lines as ``<line_no>: <text>`` so every chunk shown to the
model carries stable line numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, EncodingError, IoError, RangeError

# Rough chars-per-token heuristic used to guard window size against model
# context limits.
CHARS_PER_TOKEN = 4


@dataclass(frozen=True)
class Line:
    no: int
    text: str


@dataclass(frozen=True)
class Document:
    """An immutable, line-indexed text document."""

    id: str
    source_path: str
    lines: tuple[Line, ...]

    def __post_init__(self) -> None:
        for i, line in enumerate(self.lines, start=1):
            if line.no != i:
                raise ValueError(f"line numbers must be contiguous from 1; got {line.no} at position {i}")
            if "\n" in line.text or "\r" in line.text:
                raise ValueError(f"line {line.no} contains a line terminator")

    def __len__(self) -> int:
        return len(self.lines)

    def line(self, no: int) -> str:
        if not 1 <= no <= len(self.lines):
            raise RangeError(f"line {no} outside document 1..{len(self.lines)}")
        return self.lines[no - 1].text

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "source_path": self.source_path,
            "lines": [{"no": line.no, "text": line.text} for line in self.lines],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Document":
        lines = tuple(Line(no=item["no"], text=item["text"]) for item in data["lines"])
        return cls(id=data["id"], source_path=data["source_path"], lines=lines)


@dataclass(frozen=True)
class Window:
    """A contiguous line range rendered with line-number prefixes."""

    start_line: int
    end_line: int
    text: str


def ingest(source_path: str | Path) -> Document:
    """Load a UTF-8 text file into a Document, preserving every line verbatim."""
    path = Path(source_path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        content = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path} is not valid UTF-8: {exc}") from exc

    parts = content.split("\n")
    if parts and parts[-1] == "":
        # A trailing "\n" terminates the last line; it does not open a new one.
        parts.pop()
    lines = tuple(
        Line(no=i, text=text[:-1] if text.endswith("\r") else text)
        for i, text in enumerate(parts, start=1)
    )
    return Document(id=path.stem, source_path=str(path), lines=lines)


def _render(doc: Document, start: int, end: int) -> str:
    return "\n".join(f"{line.no}: {line.text}" for line in doc.lines[start - 1 : end])


def slice(doc: Document, start: int, end: int) -> Window:  # noqa: A001 - contract name
    """Return the inclusive line range ``start..end`` as a numbered Window."""
    n = len(doc)
    if not (1 <= start <= end <= n):
        raise RangeError(f"slice {start}..{end} outside document 1..{n}")
    return Window(start_line=start, end_line=end, text=_render(doc, start, end))


def _split_oversized(doc: Document, start: int, end: int, max_chars: int) -> list[Window]:
    window = slice(doc, start, end)
    if len(window.text) <= max_chars or start == end:
        return [window]
    mid = (start + end) // 2
    return _split_oversized(doc, start, mid, max_chars) + _split_oversized(doc, mid + 1, end, max_chars)


def windows(
    doc: Document,
    window_size: int,
    overlap: int,
    max_tokens: int | None = None,
) -> list[Window]:
    """Cover the document with sliding windows of ``window_size`` lines.

    Successive windows advance by ``window_size - overlap`` lines. When
    ``max_tokens`` is given, any window whose rendered text exceeds the
    ``CHARS_PER_TOKEN`` estimate is recursively halved.
    """
    if overlap < 0 or window_size <= overlap:
        raise ConfigError(f"window_size ({window_size}) must exceed overlap ({overlap}) and overlap must be >= 0")
    if len(doc) == 0:
        return []

    n = len(doc)
    stride = window_size - overlap
    result: list[Window] = []
    start = 1
    while True:
        end = min(start + window_size - 1, n)
        if max_tokens is not None:
            result.extend(_split_oversized(doc, start, end, max_tokens * CHARS_PER_TOKEN))
        else:
            result.append(slice(doc, start, end))
        if end >= n:
            break
        start += stride
    return result


def document_digest(doc: Document) -> str:
    """Stable content digest used by the run manifest."""
    import hashlib

    payload = json.dumps(doc.to_json(), sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()
