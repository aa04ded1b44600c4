"""Biased second-order random walks and skip-gram author embeddings.

Walks follow the node2vec bias rule: from ``cur`` having arrived from
``prev``, a neighbour ``x`` gets weight ``1/p`` if ``x == prev``, ``1`` if
``x`` is also adjacent to ``prev`` and ``1/q`` otherwise.  The walk corpus
is then fed to skip-gram with negative sampling; the learned input (centre)
vectors are the author profiles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np

from .errors import ConfigError, FormatError
from .graph import CommunityGraph

log = logging.getLogger(__name__)


@dataclass
class WalkConfig:
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 80
    walks_per_node: int = 10
    window: int = 10
    negatives_per_positive: int = 5
    dims: int = 200
    epochs: int = 25
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if not (self.p > 0 and self.q > 0):
            raise ConfigError("p and q must be positive")
        if self.walk_length < 1 or self.dims < 1 or self.window < 1:
            raise ConfigError("walk_length, dims and window must be >= 1")
        if self.walks_per_node < 0 or self.epochs < 0 or self.negatives_per_positive < 0:
            raise ConfigError("walks_per_node, epochs and negatives_per_positive must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 < self.min_learning_rate <= self.learning_rate:
            raise ConfigError("min_learning_rate must be in (0, learning_rate]")


@dataclass
class WalkCorpus:
    walks: list[list[str]]

    def __len__(self) -> int:
        return len(self.walks)

    def n_tokens(self) -> int:
        return sum(len(w) for w in self.walks)


def transition_weights(g: CommunityGraph, prev: str | None, cur: str,
                       p: float = 1.0, q: float = 1.0) -> list[tuple[str, float]]:
    """Unnormalised next-step weights over the neighbours of ``cur``."""
    out = []
    for x in g.neighbors(cur):
        if prev is None:
            w = 1.0
        elif x == prev:
            w = 1.0 / p
        elif g.has_edge(x, prev):
            w = 1.0
        else:
            w = 1.0 / q
        out.append((x, w))
    return out


# -- random numbers -------------------------------------------------------------
# splitmix64: tiny, high quality and identical inside and outside numba.

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


@numba.njit(cache=True)
def _splitmix_next(state):
    state[0] = state[0] + np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _uniform(state):
    return (_splitmix_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@numba.njit(cache=True)
def _seed_state(seed):
    state = np.zeros(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    _splitmix_next(state)
    return state


# -- walks ---------------------------------------------------------------------

@numba.njit(cache=True)
def _is_adjacent(indptr, indices, a, b):
    lo = indptr[a]
    hi = indptr[a + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        v = indices[mid]
        if v == b:
            return True
        if v < b:
            lo = mid + 1
        else:
            hi = mid
    return False


@numba.njit(cache=True)
def _walk_kernel(indptr, indices, starts, walks_per_node, walk_length, p, q, seed):
    n_starts = starts.shape[0]
    out = np.full((walks_per_node * n_starts, walk_length), -1, dtype=np.int64)
    lengths = np.zeros(walks_per_node * n_starts, dtype=np.int64)
    states = np.zeros((n_starts, 1), dtype=np.uint64)
    for si in range(n_starts):
        states[si] = _seed_state(seed + starts[si])
    uniform_bias = p == 1.0 and q == 1.0
    max_deg = 0
    for i in range(indptr.shape[0] - 1):
        max_deg = max(max_deg, indptr[i + 1] - indptr[i])
    weights = np.empty(max_deg, dtype=np.float64)
    row = 0
    for r in range(walks_per_node):
        for si in range(n_starts):
            state = states[si]
            out[row, 0] = starts[si]
            length = 1
            while length < walk_length:
                cur = out[row, length - 1]
                lo = indptr[cur]
                deg = indptr[cur + 1] - lo
                if deg == 0:
                    break
                if length == 1 or uniform_bias:
                    k = int(_uniform(state) * deg)
                    if k >= deg:
                        k = deg - 1
                else:
                    prev = out[row, length - 2]
                    total = 0.0
                    for j in range(deg):
                        x = indices[lo + j]
                        if x == prev:
                            w = 1.0 / p
                        elif _is_adjacent(indptr, indices, prev, x):
                            w = 1.0
                        else:
                            w = 1.0 / q
                        total += w
                        weights[j] = total
                    u = _uniform(state) * total
                    k = 0
                    while k < deg - 1 and weights[k] <= u:
                        k += 1
                out[row, length] = indices[lo + k]
                length += 1
            lengths[row] = length
            row += 1
    return out, lengths


def _walk_arrays(g: CommunityGraph, cfg: WalkConfig) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    csr = g.to_csr()
    deg = np.diff(csr.indptr)
    starts = np.flatnonzero(deg > 0).astype(np.int64)
    if starts.size == 0 or cfg.walks_per_node == 0:
        return csr.ids, np.zeros((0, cfg.walk_length), dtype=np.int64), np.zeros(0, dtype=np.int64)
    walks, lengths = _walk_kernel(csr.indptr, csr.indices, starts, cfg.walks_per_node,
                                  cfg.walk_length, float(cfg.p), float(cfg.q), cfg.seed)
    return csr.ids, walks, lengths


def generate_walks(g: CommunityGraph, cfg: WalkConfig) -> WalkCorpus:
    """``walks_per_node`` walks from every non-solitary node.

    Walks are ordered round-major (all start nodes for round 0, then round
    1, ...).  Each start node draws from its own stream seeded with
    ``cfg.seed + node_index`` (index in sorted id order), so the corpus does
    not depend on how the work is scheduled.
    """
    ids, walks, lengths = _walk_arrays(g, cfg)
    return WalkCorpus([[ids[j] for j in walks[i, :lengths[i]]] for i in range(len(lengths))])


# -- skip-gram with negative sampling -------------------------------------------

def _log_sigmoid(x: np.ndarray | float) -> np.ndarray | float:
    return -np.logaddexp(0.0, -np.asarray(x, dtype=float))


def sgns_loss_and_grad(center: np.ndarray, context: np.ndarray, negatives: np.ndarray):
    """Negative-sampling loss for one (centre, context, negatives) triple.

    ``negatives`` is a ``(k, dims)`` array of output vectors.  Returns
    ``(loss, d_center, d_context, d_negatives)``.
    """
    center = np.asarray(center, dtype=float)
    context = np.asarray(context, dtype=float)
    negatives = np.asarray(negatives, dtype=float).reshape(-1, center.shape[0])
    s_pos = context @ center
    s_neg = negatives @ center
    loss = -_log_sigmoid(s_pos) - np.sum(_log_sigmoid(-s_neg))
    g_pos = 1.0 / (1.0 + np.exp(-s_pos)) - 1.0
    g_neg = 1.0 / (1.0 + np.exp(-s_neg))
    d_center = g_pos * context + g_neg @ negatives
    d_context = g_pos * center
    d_negatives = g_neg[:, None] * center[None, :]
    return float(loss), d_center, d_context, d_negatives


@numba.njit(cache=True)
def _neg_log_sigmoid(x):
    if x > 0:
        return np.log1p(np.exp(-x))
    return -x + np.log1p(np.exp(x))


@numba.njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _sgns_step(syn0, syn1, c, o, negs, n_negs, lr, neu, g_neg):
    """One exact gradient step on a single pair; returns the pair loss."""
    dims = syn0.shape[1]
    s = 0.0
    for j in range(dims):
        s += syn0[c, j] * syn1[o, j]
    loss = _neg_log_sigmoid(s)
    g_pos = _sigmoid(s) - 1.0
    for k in range(n_negs):
        n = negs[k]
        s = 0.0
        for j in range(dims):
            s += syn0[c, j] * syn1[n, j]
        loss += _neg_log_sigmoid(-s)
        g_neg[k] = _sigmoid(s)
    for j in range(dims):
        neu[j] = g_pos * syn1[o, j]
    for k in range(n_negs):
        n = negs[k]
        for j in range(dims):
            neu[j] += g_neg[k] * syn1[n, j]
    for j in range(dims):
        syn1[o, j] -= lr * g_pos * syn0[c, j]
    for k in range(n_negs):
        n = negs[k]
        gk = g_neg[k]
        for j in range(dims):
            syn1[n, j] -= lr * gk * syn0[c, j]
    for j in range(dims):
        syn0[c, j] -= lr * neu[j]
    return loss


@numba.njit(cache=True)
def _count_pairs(lengths, window):
    total = 0
    for w in range(lengths.shape[0]):
        n = lengths[w]
        for i in range(n):
            lo = max(0, i - window)
            hi = min(n - 1, i + window)
            total += hi - lo
    return total


@numba.njit(cache=True)
def _train_kernel(walks, lengths, syn0, syn1, cum, window, k, epochs, lr0, lr_min, seed):
    dims = syn0.shape[1]
    state = _seed_state(seed)
    pairs_per_epoch = _count_pairs(lengths, window)
    total = pairs_per_epoch * epochs
    done = 0
    losses = np.zeros(epochs)
    negs = np.empty(max(k, 1), dtype=np.int64)
    neu = np.empty(dims)
    g_neg = np.empty(max(k, 1))
    cum_total = cum[cum.shape[0] - 1]
    for ep in range(epochs):
        ep_loss = 0.0
        ep_pairs = 0
        for w in range(lengths.shape[0]):
            n = lengths[w]
            for i in range(n):
                c = walks[w, i]
                lo = max(0, i - window)
                hi = min(n - 1, i + window)
                for jpos in range(lo, hi + 1):
                    if jpos == i:
                        continue
                    o = walks[w, jpos]
                    lr = lr0 - (lr0 - lr_min) * done / total
                    if lr < lr_min:
                        lr = lr_min
                    n_negs = 0
                    for _ in range(k):
                        u = _uniform(state) * cum_total
                        neg = np.searchsorted(cum, u, side="right")
                        if neg >= cum.shape[0]:
                            neg = cum.shape[0] - 1
                        if neg != o:
                            negs[n_negs] = neg
                            n_negs += 1
                    ep_loss += _sgns_step(syn0, syn1, c, o, negs, n_negs, lr, neu, g_neg)
                    ep_pairs += 1
                    done += 1
        losses[ep] = ep_loss / max(ep_pairs, 1)
    return losses


@dataclass
class AuthorProfileTable:
    """Author id -> embedding; unknown and solitary authors map to zeros."""

    dims: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    def profile_of(self, a: str) -> np.ndarray:
        v = self.vectors.get(a)
        if v is None:
            return np.zeros(self.dims)
        return v.copy()

    def matrix(self, authors: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(authors), self.dims))
        for i, a in enumerate(authors):
            v = self.vectors.get(a)
            if v is not None:
                out[i] = v
        return out

    def __contains__(self, a: object) -> bool:
        return a in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def save(self, path: str | Path) -> None:
        ids = sorted(self.vectors)
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write(f"{len(ids)} {self.dims}\n")
            for a in ids:
                fh.write(a + " " + " ".join(f"{x:.6g}" for x in self.vectors[a]) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> AuthorProfileTable:
        path = Path(path)
        with path.open(encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise FormatError("expected '<count> <dims>' header", str(path), 1)
            count, dims = int(header[0]), int(header[1])
            vectors = {}
            for lineno, line in enumerate(fh, 2):
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dims + 1:
                    raise FormatError(f"expected {dims} components", str(path), lineno)
                vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
        if len(vectors) != count:
            raise FormatError(f"header says {count} rows, found {len(vectors)}", str(path))
        return cls(dims, vectors)


def _unigram_cumulative(walks: np.ndarray, lengths: np.ndarray, n_nodes: int) -> np.ndarray:
    mask = np.arange(walks.shape[1])[None, :] < lengths[:, None]
    counts = np.bincount(walks[mask], minlength=n_nodes).astype(float)
    return np.cumsum(counts ** 0.75)


def _train_arrays(ids: Sequence[str], walks: np.ndarray, lengths: np.ndarray,
                  cfg: WalkConfig, all_authors: Iterable[str] = ()) -> AuthorProfileTable:
    n = len(ids)
    rng = np.random.default_rng(cfg.seed)
    syn0 = (rng.random((n, cfg.dims)) - 0.5) / cfg.dims
    syn1 = np.zeros((n, cfg.dims))
    losses = np.zeros(0)
    if len(lengths):
        cum = _unigram_cumulative(walks, lengths, n)
        losses = _train_kernel(walks, lengths, syn0, syn1, cum, cfg.window,
                               cfg.negatives_per_positive, cfg.epochs,
                               cfg.learning_rate, cfg.min_learning_rate, cfg.seed)
    walked = np.zeros(n, dtype=bool)
    if len(lengths):
        mask = np.arange(walks.shape[1])[None, :] < lengths[:, None]
        walked[np.unique(walks[mask])] = True
    table = AuthorProfileTable(cfg.dims, loss_history=[float(x) for x in losses])
    for i, a in enumerate(ids):
        table.vectors[a] = syn0[i].copy() if walked[i] else np.zeros(cfg.dims)
    for a in all_authors:
        table.vectors.setdefault(a, np.zeros(cfg.dims))
    return table


def train_profiles(corpus: WalkCorpus, cfg: WalkConfig,
                   all_authors: Iterable[str] = ()) -> AuthorProfileTable:
    """Fit skip-gram with negative sampling on a walk corpus.

    Nodes that never occur in a walk (and anything in ``all_authors``) get
    the zero vector.  Per-epoch mean pair loss lands in ``loss_history``.
    """
    cfg.validate()
    ids = sorted({a for w in corpus.walks for a in w})
    index = {a: i for i, a in enumerate(ids)}
    max_len = max((len(w) for w in corpus.walks), default=0)
    walks = np.full((len(corpus.walks), max(max_len, 1)), -1, dtype=np.int64)
    lengths = np.zeros(len(corpus.walks), dtype=np.int64)
    for i, w in enumerate(corpus.walks):
        walks[i, :len(w)] = [index[a] for a in w]
        lengths[i] = len(w)
    return _train_arrays(ids, walks, lengths, cfg, all_authors)


def embed_graph(g: CommunityGraph, cfg: WalkConfig) -> AuthorProfileTable:
    """Walks + training in one go; every graph node gets an entry."""
    ids, walks, lengths = _walk_arrays(g, cfg)
    log.info("node2vec: %d walks over %d nodes", len(lengths), len(ids))
    return _train_arrays(ids, walks, lengths, cfg, ids)
