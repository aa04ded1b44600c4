"""Two-dimensional PCA coordinates of author profiles for plotting."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError
from .graph import CommunityGraph
from .node2vec import AuthorProfileTable
from .text import LABELS, LabeledDocument


@dataclass
class Projection:
    authors: list[str]
    coords: np.ndarray          # (n, 2)
    tags: list[str]
    explained_variance: np.ndarray

    def to_tsv(self) -> str:
        lines = ["author\tpc1\tpc2\tclass"]
        lines += [f"{a}\t{x:.10g}\t{y:.10g}\t{t}" for a, (x, y), t in zip(self.authors, self.coords, self.tags)]
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")


def dominant_classes(docs: Sequence[LabeledDocument]) -> dict[str, str]:
    """Most frequent label per author; ties resolve in ``LABELS`` order."""
    counts: dict[str, Counter] = {}
    for d in docs:
        counts.setdefault(d.author, Counter())[d.label] += 1
    return {a: max(LABELS, key=lambda lab: (c[lab], -LABELS.index(lab))) for a, c in counts.items()}


def pca_2d(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean-centred projection on the top two principal axes.

    Each axis is signed so that its largest-magnitude loading is positive.
    """
    Xc = X - X.mean(axis=0)
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    axes = vt[:2].copy()
    if axes.shape[0] < 2:
        axes = np.vstack([axes, np.zeros((2 - axes.shape[0], X.shape[1]))])
    for i in range(axes.shape[0]):
        j = int(np.argmax(np.abs(axes[i])))
        if axes[i, j] < 0:
            axes[i] = -axes[i]
    var = s[:2] ** 2 / max(X.shape[0] - 1, 1)
    return Xc @ axes.T, np.pad(var, (0, 2 - var.size))


def export_projection(profiles: AuthorProfileTable, labels: Mapping[str, str],
                      graph: CommunityGraph | None = None) -> Projection:
    """PCA coordinates of every non-solitary author, tagged by dominant class.

    An author counts as solitary when the graph says so or, without a graph,
    when the profile is all zeros.  Authors with no documents are tagged
    ``unlabeled``.
    """
    authors = []
    for a in sorted(profiles.vectors):
        if graph is not None:
            if a not in graph or graph.is_solitary(a):
                continue
        elif not np.any(profiles.vectors[a]):
            continue
        authors.append(a)
    if len(authors) < 2:
        raise DegenerateInputError(f"need at least 2 non-solitary authors, found {len(authors)}")
    X = profiles.matrix(authors)
    coords, var = pca_2d(X)
    tags = [labels.get(a, "unlabeled") for a in authors]
    return Projection(authors, coords, tags, var)
