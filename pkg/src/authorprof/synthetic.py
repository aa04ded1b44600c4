"""Planted-community corpora for desk-scale checks of the author-profile lift.

Authors live in the blocks of a stochastic block model.  Each hateful class
has a home block; most of that class's documents are written by authors from
it.  A fraction ``1 - text_signal`` of hateful documents is drawn from the
neutral token distribution, so only the author's position in the graph can
identify them.  Those documents are flagged ``ambiguous`` in the manifest.
"""

from __future__ import annotations

import json
import string
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .corpus import write_documents
from .errors import ConfigError
from .graph import CommunityGraph, write_edge_list
from .text import LABELS, LabeledDocument, default_stopwords, normalize


@dataclass(frozen=True)
class SyntheticSpec:
    block_sizes: tuple[int, ...] = (100, 100, 200, 200)
    # home block per hateful class, in LABELS order (racism, sexism)
    hateful_blocks: tuple[int, ...] = (0, 1)
    p_intra: float = 0.08
    p_inter: float = 0.005
    n_documents: int = 5000
    class_proportions: tuple[float, float, float] = (0.12, 0.19, 0.69)
    text_signal: float = 0.7
    vocab_size: int = 500
    indicative_per_class: int = 40
    indicative_per_doc: tuple[int, int] = (1, 3)
    doc_length: tuple[int, int] = (5, 12)
    # share of a hateful class's documents written from its home block
    author_purity: float = 0.6
    # share of "none" documents written by authors in hateful blocks
    none_in_hateful_blocks: float = 0.1
    # chance that a "none" document borrows one indicative token
    indicative_leak: float = 0.05
    seed: int = 0

    def validate(self) -> None:
        probs = (self.p_intra, self.p_inter, self.text_signal, self.author_purity,
                 self.none_in_hateful_blocks, self.indicative_leak)
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ConfigError("probabilities must lie in [0, 1]")
        if len(self.class_proportions) != len(LABELS) or abs(sum(self.class_proportions) - 1) > 1e-9:
            raise ConfigError("class_proportions must have 3 entries summing to 1")
        if min(self.class_proportions) <= 0:
            raise ConfigError("every class needs a positive proportion")
        if len(self.hateful_blocks) != 2 or not all(0 <= b < len(self.block_sizes) for b in self.hateful_blocks):
            raise ConfigError("hateful_blocks must name two existing blocks")
        if len(set(self.hateful_blocks)) != 2 or len(self.block_sizes) < 3:
            raise ConfigError("need distinct hateful blocks and at least one neutral block")
        if min(self.block_sizes) < 1 or self.n_documents < 1:
            raise ConfigError("block sizes and n_documents must be positive")
        if self.vocab_size < 2 * self.indicative_per_class + 10:
            raise ConfigError("vocab_size too small for the indicative token sets")
        lo, hi = self.doc_length
        if not 1 <= lo <= hi or not 1 <= self.indicative_per_doc[0] <= self.indicative_per_doc[1] <= lo:
            raise ConfigError("bad doc_length / indicative_per_doc ranges")


def default_spec(seed: int = 0) -> SyntheticSpec:
    return SyntheticSpec(seed=seed)


def null_spec(seed: int = 0) -> SyntheticSpec:
    """Same corpus recipe with no community structure in the graph.

    The single edge probability keeps the expected edge count of the default.
    """
    d = SyntheticSpec()
    sizes = np.array(d.block_sizes)
    n = sizes.sum()
    intra_pairs = float(np.sum(sizes * (sizes - 1) / 2))
    all_pairs = n * (n - 1) / 2
    expected = d.p_intra * intra_pairs + d.p_inter * (all_pairs - intra_pairs)
    p = round(float(expected / all_pairs), 6)
    return replace(d, p_intra=p, p_inter=p, seed=seed)


SPECS = {"default": default_spec, "null": null_spec}


@dataclass
class SyntheticCorpus:
    documents: list[LabeledDocument]
    graph: CommunityGraph
    manifest: dict

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_documents(self.documents, out / "docs.tsv")
        write_edge_list(self.graph, out / "edges.tsv", out / "authors.txt")
        (out / "manifest.json").write_text(json.dumps(self.manifest, indent=1, sort_keys=True) + "\n",
                                           encoding="utf-8")


def _pseudo_words(rng: np.random.Generator, n: int, stop: frozenset[str]) -> list[str]:
    letters = np.array(list(string.ascii_lowercase))
    words: list[str] = []
    seen: set[str] = set()
    while len(words) < n:
        w = "".join(rng.choice(letters, size=int(rng.integers(3, 9))))
        if w not in seen and w not in stop:
            seen.add(w)
            words.append(w)
    return words


def generate_synthetic(spec: SyntheticSpec | None = None) -> SyntheticCorpus:
    spec = spec or default_spec()
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    stop = default_stopwords()

    # graph
    n_blocks = len(spec.block_sizes)
    block_of = np.repeat(np.arange(n_blocks), spec.block_sizes)
    n_auth = block_of.size
    width = len(str(n_auth - 1))
    authors = [f"u{i:0{width}d}" for i in range(n_auth)]
    g = CommunityGraph()
    for a in authors:
        g.add_author(a)
    iu, ju = np.triu_indices(n_auth, k=1)
    prob = np.where(block_of[iu] == block_of[ju], spec.p_intra, spec.p_inter)
    keep = rng.random(iu.size) < prob
    for i, j in zip(iu[keep], ju[keep]):
        g.add_edge(authors[i], authors[j])

    # vocabulary
    words = _pseudo_words(rng, spec.vocab_size, stop)
    k = spec.indicative_per_class
    indicative = [words[:k], words[k:2 * k]]
    neutral = words[2 * k:]
    zipf = 1.0 / np.arange(1, len(neutral) + 1)
    zipf /= zipf.sum()

    # labels with exact proportions (largest remainder), then shuffled
    exact = np.array(spec.class_proportions) * spec.n_documents
    counts = np.floor(exact).astype(int)
    for c in np.argsort(-(exact - counts), kind="stable")[: spec.n_documents - counts.sum()]:
        counts[c] += 1
    labels = rng.permutation(np.repeat(np.arange(len(LABELS)), counts))

    hateful = set(spec.hateful_blocks)
    neutral_authors = np.flatnonzero([b not in hateful for b in block_of])
    hateful_authors = np.flatnonzero([b in hateful for b in block_of])
    home = [np.flatnonzero(block_of == b) for b in spec.hateful_blocks]

    docs: list[LabeledDocument] = []
    doc_meta: dict[str, dict] = {}
    dwidth = len(str(spec.n_documents - 1))
    for i, c in enumerate(labels):
        c = int(c)
        if c < 2:
            pool = home[c] if rng.random() < spec.author_purity else neutral_authors
        else:
            pool = hateful_authors if rng.random() < spec.none_in_hateful_blocks else neutral_authors
        author = int(pool[rng.integers(pool.size)])
        length = int(rng.integers(spec.doc_length[0], spec.doc_length[1] + 1))
        toks = list(rng.choice(neutral, size=length, p=zipf))
        ambiguous = False
        if c < 2:
            if rng.random() < spec.text_signal:
                m = int(rng.integers(spec.indicative_per_doc[0], spec.indicative_per_doc[1] + 1))
                pos = rng.choice(length, size=m, replace=False)
                for p_ in pos:
                    toks[p_] = indicative[c][rng.integers(k)]
            else:
                ambiguous = True
        elif rng.random() < spec.indicative_leak:
            toks[rng.integers(length)] = indicative[rng.integers(2)][rng.integers(k)]
        raw = " ".join(str(t) for t in toks)
        doc_id = f"d{i:0{dwidth}d}"
        docs.append(LabeledDocument(doc_id, authors[author], raw, LABELS[c], normalize(raw, stop)))
        doc_meta[doc_id] = {"label": LABELS[c], "author": authors[author],
                            "block": int(block_of[author]), "ambiguous": ambiguous}

    manifest = {
        "spec": asdict(spec),
        "authors": {a: int(b) for a, b in zip(authors, block_of)},
        "indicative_tokens": {LABELS[0]: indicative[0], LABELS[1]: indicative[1]},
        "documents": doc_meta,
        "n_ambiguous": int(sum(m["ambiguous"] for m in doc_meta.values())),
    }
    return SyntheticCorpus(docs, g, manifest)
