"""Corpus loading and chunking.

Raw TXT/CSV/JSON/JSONL files become Documents; Documents are split into
overlapping Chunks by a recursive separator-hierarchy splitter. Chunk
sizes count Unicode scalar values (characters), never bytes.

Splitter semantics, frozen here:

1. Split on the first separator (in configured order) that actually cuts
   the text; the separator stays attached to the preceding piece, so
   piece spans tile the document. Pieces still longer than ``chunk_size``
   are re-split with the remaining separators; the empty-string separator
   splits per character and guarantees termination.
2. Greedily pack adjacent pieces into windows of <= ``chunk_size`` chars.
3. Each window after the first starts at the earliest piece boundary
   within ``chunk_overlap`` characters of the previous window's end that
   still lets the next piece fit; chunks are literal spans of the
   original content.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

CATEGORIES = frozenset(
    {
        "government",
        "city",
        "sports",
        "food",
        "culture",
        "museums",
        "music",
        "events",
        "history",
        "school",
        "other",
    }
)

DEFAULT_SEPARATORS = ("\n\n", "\n", " ", "")


def document_id(source: str) -> str:
    """Stable content address: hex digest of the source string."""
    return hashlib.sha256(source.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Document:
    id: str
    source: str
    title: str
    content: str
    category: str
    fetched_at: int

    def __post_init__(self) -> None:
        if len(self.content) < 1:
            raise DataError(f"document {self.source!r} has empty content")
        if self.category not in CATEGORIES:
            raise DataError(f"unknown category {self.category!r}")


def make_document(
    source: str, title: str, content: str, category: str, fetched_at: int
) -> Document:
    return Document(
        id=document_id(source),
        source=source,
        title=title,
        content=content,
        category=category,
        fetched_at=fetched_at,
    )


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    ordinal: int
    text: str
    char_start: int
    char_end: int


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = 1000
    chunk_overlap: int = 200
    separators: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self) -> None:
        if self.chunk_size < 1:
            raise DataError("chunk_size must be >= 1")
        if not 0 <= self.chunk_overlap < self.chunk_size:
            raise DataError("chunk_overlap must satisfy 0 <= overlap < chunk_size")


def _split_spans(
    content: str, start: int, end: int, separators: tuple[str, ...], chunk_size: int
) -> list[tuple[int, int]]:
    """Tile [start, end) with piece spans of <= chunk_size characters."""
    if end - start <= chunk_size:
        return [(start, end)]
    for i, sep in enumerate(separators):
        if sep == "":
            return [(j, j + 1) for j in range(start, end)]
        cuts = []
        pos = content.find(sep, start, end)
        while pos != -1:
            cut = pos + len(sep)
            if cut < end:
                cuts.append(cut)
            pos = content.find(sep, cut, end)
        if not cuts:
            continue
        remaining = separators[i + 1 :]
        pieces: list[tuple[int, int]] = []
        prev = start
        for cut in cuts + [end]:
            if cut - prev > chunk_size:
                pieces.extend(_split_spans(content, prev, cut, remaining, chunk_size))
            else:
                pieces.append((prev, cut))
            prev = cut
        return pieces
    # none of the separators cut this span: character fallback
    return [(j, j + 1) for j in range(start, end)]


def chunk_document(doc: Document, cfg: ChunkingConfig | None = None) -> list[Chunk]:
    """Split a document into overlapping chunks; spans cover the content."""
    cfg = cfg or ChunkingConfig()
    content = doc.content
    if not content:
        return []
    pieces = _split_spans(content, 0, len(content), cfg.separators, cfg.chunk_size)
    boundaries = [0] + [e for _, e in pieces]

    spans: list[tuple[int, int]] = []
    i, n = 0, len(pieces)
    ws = 0
    while i < n:
        we = ws
        while i < n and pieces[i][1] - ws <= cfg.chunk_size:
            we = pieces[i][1]
            i += 1
        spans.append((ws, we))
        if i < n:
            # next window: overlap-aligned start that still fits the next piece
            lo = max(we - cfg.chunk_overlap, pieces[i][1] - cfg.chunk_size)
            ws = boundaries[bisect_left(boundaries, lo)]

    return [
        Chunk(
            id=f"{doc.id}:{ordinal}",
            doc_id=doc.id,
            ordinal=ordinal,
            text=content[s:e],
            char_start=s,
            char_end=e,
        )
        for ordinal, (s, e) in enumerate(spans)
    ]


def _json_scalar(value: object) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value)


def render_json_markdown(record: object, indent: int = 0) -> str:
    """Render a JSON value as markdown: bold keys, nested blocks indented."""
    pad = "  " * indent
    if isinstance(record, dict):
        lines = []
        for key, value in record.items():
            if isinstance(value, dict):
                lines.append(f"{pad}**{key}**:")
                lines.append(render_json_markdown(value, indent + 1))
            elif isinstance(value, list) and any(
                isinstance(v, (dict, list)) for v in value
            ):
                lines.append(f"{pad}**{key}**:")
                for item in value:
                    lines.append(render_json_markdown(item, indent + 1))
            elif isinstance(value, list):
                lines.append(f"{pad}**{key}**: " + ", ".join(_json_scalar(v) for v in value))
            else:
                lines.append(f"{pad}**{key}**: {_json_scalar(value)}")
        return "\n".join(lines)
    if isinstance(record, list):
        return "\n".join(render_json_markdown(item, indent) for item in record)
    return f"{pad}{_json_scalar(record)}"


@dataclass
class LoadReport:
    loaded: int = 0
    skipped_empty: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "loaded": self.loaded,
            "skipped_empty": self.skipped_empty,
            "errors": [list(e) for e in self.errors],
        }


def _record_title(record: object) -> str:
    if isinstance(record, dict):
        for key in ("title", "name"):
            value = record.get(key)
            if isinstance(value, str):
                return value
    return ""


def _render_csv(text: str) -> str:
    rows = csv.reader(io.StringIO(text))
    return "\n".join(", ".join(cell.strip() for cell in row) for row in rows)


def load_documents(
    paths: list[str | Path], default_category: str = "other"
) -> tuple[list[Document], LoadReport]:
    """Load corpus files into Documents.

    TXT -> one Document; JSON/JSONL -> one per record (objects rendered
    to markdown); CSV -> one Document for the whole file, rows rendered
    line by line. Empty-after-trim inputs are skipped and counted;
    per-file failures are collected, never raised.
    """
    documents: list[Document] = []
    report = LoadReport()
    for raw_path in paths:
        path = Path(raw_path)
        try:
            records = _load_file(path)
        except Exception as exc:  # unreadable file, malformed JSON, ...
            report.errors.append((str(path), str(exc)))
            continue
        fetched_at = int(path.stat().st_mtime)
        for source, title, content in records:
            content = content.strip()
            if not content:
                report.skipped_empty += 1
                continue
            documents.append(
                make_document(source, title, content, default_category, fetched_at)
            )
            report.loaded += 1
    return documents, report


def _load_file(path: Path) -> list[tuple[str, str, str]]:
    """Return (source, title, content) triples for one corpus file."""
    suffix = path.suffix.lower()
    if suffix == ".csv":
        text = path.read_text(encoding="utf-8", errors="replace")
        return [(str(path), path.stem, _render_csv(text))]
    if suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(data, list):
            return [
                (f"{path}#{i}", _record_title(rec), render_json_markdown(rec))
                for i, rec in enumerate(data)
            ]
        return [(str(path), _record_title(data), render_json_markdown(data))]
    if suffix in (".jsonl", ".ndjson"):
        triples = []
        for i, line in enumerate(
            path.read_text(encoding="utf-8").splitlines()
        ):
            if not line.strip():
                continue
            rec = json.loads(line)
            triples.append(
                (f"{path}#{i}", _record_title(rec), render_json_markdown(rec))
            )
        return triples
    # .txt and anything else: plain text
    text = path.read_text(encoding="utf-8", errors="replace")
    return [(str(path), path.stem, text)]


_CORPUS_FIELDS = ("id", "source", "title", "content", "category", "fetched_at")


def write_corpus(documents: list[Document], path: str | Path) -> None:
    """Write the corpus JSONL contract file: one Document per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in documents:
            fh.write(
                json.dumps(
                    {
                        "id": doc.id,
                        "source": doc.source,
                        "title": doc.title,
                        "content": doc.content,
                        "category": doc.category,
                        "fetched_at": doc.fetched_at,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_corpus(path: str | Path) -> list[Document]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read corpus {path}: {exc}") from exc
    documents = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            documents.append(
                Document(**{k: rec[k] for k in _CORPUS_FIELDS})
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: malformed corpus line: {exc}") from exc
    return documents
