"""Undirected author community graph."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DegenerateGraphError, FormatError, SelfLoopError, UnknownAuthorError


@dataclass(frozen=True)
class CsrAdjacency:
    """Index-based adjacency; node ``i`` is ``ids[i]`` and ids are sorted."""

    ids: tuple[str, ...]
    indptr: np.ndarray
    indices: np.ndarray

    def index_of(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.ids)}


class CommunityGraph:
    """Simple undirected, unweighted graph keyed by author id.

    Build it with :meth:`add_author` / :meth:`add_edge`, then treat it as
    read-only; neighbour lists are served sorted by id so that walks are
    reproducible.
    """

    def __init__(self) -> None:
        self._adj: dict[str, set[str]] = {}
        self._n_edges = 0
        self._sorted_cache: dict[str, list[str]] = {}
        self._csr: CsrAdjacency | None = None

    # -- construction -----------------------------------------------------
    def add_author(self, a: str) -> CommunityGraph:
        if not isinstance(a, str) or not a:
            raise ValueError("author id must be a non-empty string")
        if a not in self._adj:
            self._adj[a] = set()
            self._invalidate()
        return self

    def add_edge(self, u: str, v: str) -> CommunityGraph:
        if u == v:
            raise SelfLoopError(f"self-loop on author {u!r}")
        self.add_author(u)
        self.add_author(v)
        if v not in self._adj[u]:
            self._adj[u].add(v)
            self._adj[v].add(u)
            self._n_edges += 1
            self._invalidate()
        return self

    def _invalidate(self) -> None:
        self._sorted_cache.clear()
        self._csr = None

    # -- queries -------------------------------------------------------------
    def __contains__(self, a: object) -> bool:
        return a in self._adj

    def __len__(self) -> int:
        return len(self._adj)

    @property
    def n_nodes(self) -> int:
        return len(self._adj)

    @property
    def n_edges(self) -> int:
        return self._n_edges

    def nodes(self) -> list[str]:
        return sorted(self._adj)

    def edges(self) -> list[tuple[str, str]]:
        """Each undirected edge once, as ``(min_id, max_id)``, sorted."""
        return sorted((u, v) for u, nbrs in self._adj.items() for v in nbrs if u < v)

    def has_edge(self, u: str, v: str) -> bool:
        return u in self._adj and v in self._adj[u]

    def neighbors(self, a: str) -> list[str]:
        if a not in self._adj:
            raise UnknownAuthorError(a)
        cached = self._sorted_cache.get(a)
        if cached is None:
            cached = sorted(self._adj[a])
            self._sorted_cache[a] = cached
        return list(cached)

    def degree(self, a: str) -> int:
        if a not in self._adj:
            raise UnknownAuthorError(a)
        return len(self._adj[a])

    def is_solitary(self, a: str) -> bool:
        return self.degree(a) == 0

    def solitary_authors(self) -> list[str]:
        return sorted(a for a, nbrs in self._adj.items() if not nbrs)

    def density(self) -> float:
        """|E| / C(|V|, 2)."""
        n = len(self._adj)
        if n < 2:
            raise DegenerateGraphError("density needs at least 2 nodes")
        return self._n_edges / (n * (n - 1) / 2)

    def density_non_solitary(self) -> float:
        """Density computed over nodes with at least one edge."""
        n = len(self._adj) - len(self.solitary_authors())
        if n < 2:
            raise DegenerateGraphError("density needs at least 2 non-solitary nodes")
        return self._n_edges / (n * (n - 1) / 2)

    def mean_degree(self, non_solitary: bool = False) -> float:
        n = len(self._adj)
        if non_solitary:
            n -= len(self.solitary_authors())
        if n == 0:
            raise DegenerateGraphError("mean degree of an empty node set")
        return 2 * self._n_edges / n

    def summary(self) -> dict[str, float]:
        out: dict[str, float] = {
            "nodes": self.n_nodes,
            "edges": self.n_edges,
            "solitary": len(self.solitary_authors()),
        }
        if self.n_nodes:
            out["mean_degree"] = self.mean_degree()
        if self.n_nodes >= 2:
            out["density"] = self.density()
        if self.n_nodes - out["solitary"] >= 2:
            out["density_non_solitary"] = self.density_non_solitary()
            out["mean_degree_non_solitary"] = self.mean_degree(non_solitary=True)
        return out

    def to_csr(self) -> CsrAdjacency:
        if self._csr is None:
            ids = tuple(self.nodes())
            index = {a: i for i, a in enumerate(ids)}
            indptr = np.zeros(len(ids) + 1, dtype=np.int64)
            flat: list[int] = []
            for i, a in enumerate(ids):
                flat.extend(index[b] for b in self.neighbors(a))
                indptr[i + 1] = len(flat)
            self._csr = CsrAdjacency(ids, indptr, np.asarray(flat, dtype=np.int64))
        return self._csr

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CommunityGraph):
            return NotImplemented
        return self._adj == other._adj

    def __repr__(self) -> str:
        return f"CommunityGraph(nodes={self.n_nodes}, edges={self.n_edges})"

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[str, str]], authors: Iterable[str] = ()) -> CommunityGraph:
        g = cls()
        for a in authors:
            g.add_author(a)
        for u, v in edges:
            g.add_edge(u, v)
        return g


# -- file formats --------------------------------------------------------------

def read_edge_list(path: str | Path, authors_path: str | Path | None = None) -> CommunityGraph:
    """Parse a tab-separated edge list (``#`` comments allowed).

    Duplicate and reversed lines collapse to one undirected edge.  Authors
    listed in ``authors_path`` (one id per line) are added even if solitary.
    """
    path = Path(path)
    g = CommunityGraph()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise FormatError("expected '<author_id>\\t<author_id>'", str(path), lineno)
            try:
                g.add_edge(parts[0], parts[1])
            except SelfLoopError as exc:
                raise FormatError(str(exc), str(path), lineno) from None
    if authors_path is not None:
        read_author_list(authors_path, g)
    return g


def read_author_list(path: str | Path, g: CommunityGraph | None = None) -> CommunityGraph:
    g = g if g is not None else CommunityGraph()
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            a = line.strip()
            if a and not a.startswith("#"):
                g.add_author(a)
    return g


def write_edge_list(g: CommunityGraph, path: str | Path, authors_path: str | Path | None = None) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for u, v in g.edges():
            fh.write(f"{u}\t{v}\n")
    if authors_path is not None:
        with Path(authors_path).open("w", encoding="utf-8") as fh:
            for a in g.nodes():
                fh.write(f"{a}\n")
