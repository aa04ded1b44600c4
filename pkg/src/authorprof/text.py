"""Text normalisation, character n-gram counts and word-embedding tables."""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import EmptyCorpusError, FormatError

LABELS: tuple[str, ...] = ("racism", "sexism", "none")
NGRAM_ORDERS = (1, 2, 3, 4)
INIT_RANGE = 0.05


@dataclass
class LabeledDocument:
    doc_id: str
    author: str
    raw_text: str
    label: str
    tokens: list[str] = field(default_factory=list)

    @property
    def label_index(self) -> int:
        return LABELS.index(self.label)


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    """The bundled English stopword list (``data/stopwords_en.txt``)."""
    text = resources.files("authorprof").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#"))


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def _strip_token(tok: str) -> str:
    start, end = 0, len(tok)
    while start < end and _is_punct(tok[start]) and tok[start] not in "@#":
        start += 1
    while end > start and _is_punct(tok[end - 1]):
        end -= 1
    return tok[start:end]


def normalize(raw: str, stopwords: Iterable[str] | None = None) -> list[str]:
    """Lowercase, split on whitespace, trim edge punctuation, drop stopwords.

    Leading ``@``/``#`` survive the trim.  ``stopwords=None`` uses the bundled
    English list; pass an empty set to keep everything.
    """
    stop = default_stopwords() if stopwords is None else frozenset(stopwords)
    out = []
    for tok in raw.lower().split():
        tok = _strip_token(tok)
        if tok and tok not in stop:
            out.append(tok)
    return out


def ngram_counts(text: str, orders: Sequence[int] = NGRAM_ORDERS) -> Counter[str]:
    counts: Counter[str] = Counter()
    for n in orders:
        for i in range(len(text) - n + 1):
            counts[text[i:i + n]] += 1
    return counts


def ngram_text(doc: LabeledDocument | Sequence[str], raw: bool = False) -> str:
    """The string n-grams are cut from: space-joined tokens, or raw text."""
    if isinstance(doc, LabeledDocument):
        return doc.raw_text if raw else " ".join(doc.tokens)
    return " ".join(doc)


@dataclass(frozen=True)
class CharNgramVocabulary:
    grams: tuple[str, ...]
    raw: bool = False

    @property
    def index(self) -> dict[str, int]:
        return _gram_index(self.grams)

    def __len__(self) -> int:
        return len(self.grams)


@lru_cache(maxsize=8)
def _gram_index(grams: tuple[str, ...]) -> dict[str, int]:
    return {g: i for i, g in enumerate(grams)}


def build_ngram_vocab(train_docs: Sequence[LabeledDocument], raw: bool = False) -> CharNgramVocabulary:
    """Every 1..4-gram seen in the training documents, sorted."""
    if not train_docs:
        raise EmptyCorpusError("cannot build an n-gram vocabulary from no documents")
    grams: set[str] = set()
    for d in train_docs:
        grams.update(ngram_counts(ngram_text(d, raw)))
    return CharNgramVocabulary(tuple(sorted(grams)), raw)


def char_ngram_features(tokens: Sequence[str], vocab: CharNgramVocabulary) -> np.ndarray:
    """L2-normalised n-gram counts of one token sequence (dense)."""
    vec = np.zeros(len(vocab))
    index = vocab.index
    for g, c in ngram_counts(" ".join(tokens)).items():
        j = index.get(g)
        if j is not None:
            vec[j] = c
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def char_ngram_matrix(docs: Sequence[LabeledDocument], vocab: CharNgramVocabulary) -> sp.csr_matrix:
    """Row-normalised n-gram counts for many documents, as CSR."""
    index = vocab.index
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for d in docs:
        row = sorted((index[g], c) for g, c in ngram_counts(ngram_text(d, vocab.raw)).items() if g in index)
        if row:
            vals = np.array([c for _, c in row], dtype=float)
            vals /= np.sqrt(vals @ vals)
            indices.extend(j for j, _ in row)
            data.extend(vals.tolist())
        indptr.append(len(indices))
    return sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr)),
                         shape=(len(docs), len(vocab)))


# -- word embeddings ----------------------------------------------------------------

@dataclass
class WordEmbeddingTable:
    """Token -> row lookup with a dedicated OOV row (the last row)."""

    tokens: tuple[str, ...]
    matrix: np.ndarray
    pretrained: np.ndarray  # bool per row; OOV row is always False

    def __post_init__(self) -> None:
        self._index = {t: i for i, t in enumerate(self.tokens)}
        if self.matrix.shape[0] != len(self.tokens) + 1:
            raise ValueError("matrix must have one row per token plus an OOV row")

    @property
    def dims(self) -> int:
        return self.matrix.shape[1]

    @property
    def oov_index(self) -> int:
        return len(self.tokens)

    def lookup(self, token: str) -> int:
        return self._index.get(token, self.oov_index)

    def ids(self, tokens: Sequence[str]) -> list[int]:
        return [self._index.get(t, self.oov_index) for t in tokens]

    def vector(self, token: str) -> np.ndarray:
        return self.matrix[self.lookup(token)]

    def copy(self) -> WordEmbeddingTable:
        return WordEmbeddingTable(self.tokens, self.matrix.copy(), self.pretrained.copy())


def read_word_vectors(path: str | Path) -> dict[str, np.ndarray]:
    """Parse ``<token> <f1> ... <fd>`` lines with an optional ``<count> <dims>`` header."""
    path = Path(path)
    vectors: dict[str, np.ndarray] = {}
    dims = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if not parts or parts == [""]:
                continue
            if lineno == 1 and len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit():
                dims = int(parts[1])
                continue
            if dims is None:
                dims = len(parts) - 1
            if len(parts) - 1 != dims or dims < 1:
                raise FormatError(f"ragged row: expected {dims} components, got {len(parts) - 1}",
                                  str(path), lineno)
            try:
                vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise FormatError("non-numeric component", str(path), lineno) from None
    return vectors


def write_word_vectors(vectors: dict[str, np.ndarray], path: str | Path) -> None:
    items = sorted(vectors.items())
    dims = len(items[0][1]) if items else 0
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{len(items)} {dims}\n")
        for tok, vec in items:
            fh.write(tok + " " + " ".join(f"{x:.6g}" for x in vec) + "\n")


def build_vocabulary(docs: Iterable[LabeledDocument]) -> tuple[str, ...]:
    return tuple(sorted({t for d in docs for t in d.tokens}))


def load_pretrained(table_file: str | Path | None, vocabulary: Sequence[str], dims: int = 200,
                    seed: int = 0, random_only: bool = False) -> WordEmbeddingTable:
    """Embedding table for ``vocabulary`` seeded from a word-vector file.

    Tokens found in the file keep their vectors; every other token, and the
    OOV row, is drawn uniformly from +-0.05.  With ``random_only`` (or no
    file) all rows are random.
    """
    pre: dict[str, np.ndarray] = {}
    if table_file is not None and not random_only:
        pre = read_word_vectors(table_file)
        if pre:
            file_dims = len(next(iter(pre.values())))
            if file_dims != dims:
                raise FormatError(f"vector file has {file_dims} dims, expected {dims}", str(table_file))
    tokens = tuple(vocabulary)
    rng = np.random.default_rng(seed)
    matrix = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(len(tokens) + 1, dims))
    flags = np.zeros(len(tokens) + 1, dtype=bool)
    for i, t in enumerate(tokens):
        v = pre.get(t)
        if v is not None:
            matrix[i] = v
            flags[i] = True
    return WordEmbeddingTable(tokens, matrix, flags)


def embedding_sum(tokens: Sequence[str], table: WordEmbeddingTable) -> np.ndarray:
    """L2-normalised sum of token rows (OOV row for unknown tokens)."""
    if not tokens:
        return np.zeros(table.dims)
    s = table.matrix[table.ids(tokens)].sum(axis=0)
    norm = np.linalg.norm(s)
    return s / norm if norm > 0 else s


def embedding_sum_matrix(docs: Sequence[LabeledDocument], table: WordEmbeddingTable) -> np.ndarray:
    return np.vstack([embedding_sum(d.tokens, table) for d in docs]) if docs else np.zeros((0, table.dims))
