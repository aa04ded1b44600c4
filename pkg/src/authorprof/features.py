"""Row-per-document feature matrices with column provenance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import ShapeError

PROVENANCE_TAGS = ("ngram", "hidden_state", "embedding_sum", "author_profile")

Array = Union[np.ndarray, sp.csr_matrix]


@dataclass
class FeatureMatrix:
    """Feature rows plus ``(tag, width)`` blocks describing where columns came from.

    ``values`` is a dense array except for n-gram blocks, which stay CSR until
    they are concatenated with something that needs density.
    """

    values: Array
    blocks: tuple[tuple[str, int], ...]
    row_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ShapeError("feature values must be 2-D")
        if sum(w for _, w in self.blocks) != self.values.shape[1]:
            raise ShapeError("block widths do not add up to the column count")
        if self.row_ids and len(self.row_ids) != self.values.shape[0]:
            raise ShapeError("row_ids length does not match row count")
        data = self.values.data if sp.issparse(self.values) else self.values
        if not np.all(np.isfinite(data)):
            raise ValueError("feature matrix contains NaN or Inf")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(t for t, _ in self.blocks)

    @property
    def provenance(self) -> str:
        tags = self.tags
        return tags[0] if len(tags) == 1 else "concatenation"

    def dense(self) -> np.ndarray:
        return self.values.toarray() if sp.issparse(self.values) else np.asarray(self.values)

    @classmethod
    def single(cls, values: Array, tag: str, row_ids: Sequence[str] = ()) -> FeatureMatrix:
        if tag not in PROVENANCE_TAGS:
            raise ValueError(f"unknown provenance tag {tag!r}")
        return cls(values, ((tag, values.shape[1]),), tuple(row_ids))


def concat_features(a: FeatureMatrix, b: FeatureMatrix) -> FeatureMatrix:
    """Column-wise ``[a | b]``; rows must line up."""
    if a.shape[0] != b.shape[0]:
        raise ShapeError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    if a.row_ids and b.row_ids and a.row_ids != b.row_ids:
        raise ShapeError("row order differs between the two matrices")
    if sp.issparse(a.values) or sp.issparse(b.values):
        values = sp.hstack([sp.csr_matrix(a.values), sp.csr_matrix(b.values)], format="csr")
    else:
        values = np.hstack([a.values, b.values])
    blocks = tuple(blk for blk in a.blocks + b.blocks if blk[1] > 0) or a.blocks + b.blocks
    return FeatureMatrix(values, blocks, a.row_ids or b.row_ids)
