"""Stratified folds, class-weighted P/R/F1 and paired t-tests."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import TooFewSamplesError, WeightError, ZeroVarianceError
from .text import LABELS, LabeledDocument


# -- folds ------------------------------------------------------------------------

@dataclass
class FoldPlan:
    k: int
    seed: int
    folds: list[list[str]]            # doc ids per fold
    indices: list[np.ndarray] = field(repr=False, default_factory=list)

    def train_test(self, fold: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.indices[fold]
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        return np.flatnonzero(mask), test


def make_folds_from_labels(y: Sequence[int], k: int, seed: int) -> list[np.ndarray]:
    """Stratified partition of row indices into ``k`` folds.

    Each class is shuffled and dealt round-robin; the dealing offset carries
    over between classes so fold sizes stay balanced too.
    """
    y = np.asarray(y)
    if k < 2:
        raise TooFewSamplesError("need k >= 2 folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if members.size < k:
            raise TooFewSamplesError(f"class {c!r} has {members.size} members, fewer than k={k}")
        members = members[rng.permutation(members.size)]
        assignment[members] = (offset + np.arange(members.size)) % k
        offset = (offset + members.size) % k
    return [np.flatnonzero(assignment == f) for f in range(k)]


def make_folds(docs: Sequence[LabeledDocument], k: int = 10, seed: int = 0) -> FoldPlan:
    y = [d.label for d in docs]
    idx = make_folds_from_labels(y, k, seed)
    return FoldPlan(k, seed, [[docs[i].doc_id for i in fold] for fold in idx], idx)


# -- metrics ----------------------------------------------------------------------------

def class_metrics(predictions: Sequence, gold: Sequence, c) -> tuple[float, float, float]:
    """One-vs-rest precision, recall, F1 for class ``c`` (0/0 -> 0)."""
    pred = np.asarray(predictions)
    gold = np.asarray(gold)
    tp = int(np.sum((pred == c) & (gold == c)))
    fp = int(np.sum((pred == c) & (gold != c)))
    fn = int(np.sum((pred != c) & (gold == c)))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def weighted_metric(per_class: Sequence[float], weights: Sequence[float]) -> float:
    weights = np.asarray(weights, dtype=float)
    if len(per_class) != len(weights):
        raise WeightError("one weight per class is required")
    if abs(weights.sum() - 1.0) > 1e-9 or np.any(weights < 0):
        raise WeightError(f"weights must be non-negative and sum to 1, got {weights.sum()!r}")
    return float(sum(w * s for w, s in zip(weights, per_class)))


def class_weights_from_labels(y: Sequence[int], n_classes: int = 3) -> np.ndarray:
    counts = np.bincount(np.asarray(y, dtype=np.int64), minlength=n_classes).astype(float)
    return counts / counts.sum()


def class_weights(docs: Sequence[LabeledDocument]) -> np.ndarray:
    """Dataset class proportions in ``LABELS`` order."""
    return class_weights_from_labels([d.label_index for d in docs], len(LABELS))


def weighted_scores(gold: Sequence[int], pred: Sequence[int], weights: Sequence[float],
                    n_classes: int = 3) -> dict:
    per = [class_metrics(pred, gold, c) for c in range(n_classes)]
    return {
        "per_class": per,
        "precision": weighted_metric([p[0] for p in per], weights),
        "recall": weighted_metric([p[1] for p in per], weights),
        "f1": weighted_metric([p[2] for p in per], weights),
    }


# -- Student t ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float, eps: float = 1e-15, max_iter: int = 10_000) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


@dataclass
class SignificanceResult:
    method_a: str
    method_b: str
    differences: list[float]
    t: float
    df: int
    p_value: float
    status: str = "ok"   # "ok" | "identical" | "degenerate-significant"


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float],
                  method_a: str = "a", method_b: str = "b") -> SignificanceResult:
    """Two-tailed paired t-test on per-fold scores (differences a - b)."""
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("need two aligned score vectors of length >= 2")
    d = a - b
    k = d.size
    if np.all(d == d[0]):
        raise ZeroVarianceError(float(d[0]))
    sd = float(np.std(d, ddof=1))
    t = float(np.mean(d)) / (sd / math.sqrt(k))
    return SignificanceResult(method_a, method_b, d.tolist(), t, k - 1, t_two_tailed_p(t, k - 1))


def compare(scores_a: Sequence[float], scores_b: Sequence[float],
            method_a: str = "a", method_b: str = "b") -> SignificanceResult:
    """:func:`paired_t_test` that reports zero-variance cases instead of raising."""
    try:
        return paired_t_test(scores_a, scores_b, method_a, method_b)
    except ZeroVarianceError as exc:
        d = (np.asarray(scores_a, dtype=float) - np.asarray(scores_b, dtype=float)).tolist()
        if exc.identical:
            return SignificanceResult(method_a, method_b, d, 0.0, len(d) - 1, 1.0, "identical")
        t = math.copysign(math.inf, exc.mean_difference)
        return SignificanceResult(method_a, method_b, d, t, len(d) - 1, 0.0, "degenerate-significant")
