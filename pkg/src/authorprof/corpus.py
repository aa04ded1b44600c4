"""Document files: ``doc_id <TAB> author_id <TAB> label <TAB> text`` per line.

Text fields escape backslash, tab and newline as ``\\\\``, ``\\t`` and ``\\n``.
Blank lines and lines starting with ``#`` are skipped, as is a leading
header line beginning with ``doc_id``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

from .errors import FormatError, UnknownLabelError
from .graph import CommunityGraph, read_edge_list
from .text import LABELS, LabeledDocument, default_stopwords, normalize

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def escape_field(s: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in s)


def unescape_field(s: str) -> str:
    out = []
    it = iter(s)
    for ch in it:
        if ch == "\\":
            nxt = next(it, "")
            out.append(_UNESCAPES.get(nxt, "\\" + nxt))
        else:
            out.append(ch)
    return "".join(out)


def _require(path: str | Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FormatError("file not found", str(path))
    return path


def read_documents(path: str | Path, stopwords: Iterable[str] | None = None) -> list[LabeledDocument]:
    path = _require(path)
    stop = frozenset(stopwords) if stopwords is not None else default_stopwords()
    docs: list[LabeledDocument] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            if lineno == 1 and line.startswith("doc_id\t"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise FormatError(f"expected 4 tab-separated fields, got {len(parts)}", str(path), lineno)
            doc_id, author, label, text = parts
            if not doc_id or not author:
                raise FormatError("empty doc_id or author_id", str(path), lineno)
            if label not in LABELS:
                raise UnknownLabelError(f"unknown label {label!r} (expected one of {', '.join(LABELS)})",
                                        str(path), lineno)
            if doc_id in seen:
                raise FormatError(f"duplicate doc_id {doc_id!r}", str(path), lineno)
            seen.add(doc_id)
            raw = unescape_field(text)
            docs.append(LabeledDocument(doc_id, author, raw, label, normalize(raw, stop)))
    return docs


def write_documents(docs: Sequence[LabeledDocument], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("doc_id\tauthor_id\tlabel\ttext\n")
        for d in docs:
            fh.write(f"{d.doc_id}\t{d.author}\t{d.label}\t{escape_field(d.raw_text)}\n")


def ingest(docs_file: str | Path, edges_file: str | Path, authors_file: str | Path | None = None,
           stopwords: Iterable[str] | None = None) -> tuple[list[LabeledDocument], CommunityGraph]:
    """Load documents and the community graph; document authors missing from
    the edge file are added as solitary nodes."""
    docs = read_documents(docs_file, stopwords)
    graph = read_edge_list(_require(edges_file), authors_file)
    for d in docs:
        graph.add_author(d.author)
    return docs, graph
