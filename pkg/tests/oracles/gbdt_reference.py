"""Brute-force Newton boosting, written independently of ``authorprof.gbdt``.

Pure Python on lists; every split is found by summing gradients over the
rows on each side directly.  Rules shared with the real implementation:

* base score per class is ``log(max(prior, 1e-15))``
* candidate thresholds for a feature are midpoints between consecutive
  distinct training values; ``x <= threshold`` goes left
* gain = GL^2/(HL+lam) + GR^2/(HR+lam) - G^2/(H+lam); split only when the
  best gain exceeds 1e-12 and both sides keep >= min_leaf rows
* ties: lowest feature, then lowest threshold; a later candidate replaces the
  incumbent only if gain > best + 1e-9 * |best|, so exact ties survive rounding
* leaf value = -lr * G / (H + lam)
* per round the class probabilities are frozen, then one tree per class

Run directly to print the per-round training log-loss on a fixture.
"""

from __future__ import annotations

import math
import random


def softmax_row(z):
    m = max(z)
    e = [math.exp(v - m) for v in z]
    s = sum(e)
    return [v / s for v in e]


def candidate_thresholds(X, f):
    vals = sorted(set(row[f] for row in X))
    out = []
    for a, b in zip(vals, vals[1:]):
        t = (a + b) / 2.0
        if not a <= t < b:
            t = a
        out.append(t)
    return out


def build(X, g, h, rows, depth, thresholds, max_depth, min_leaf, lam, lr):
    G = sum(g[r] for r in rows)
    H = sum(h[r] for r in rows)
    best = None
    best_gain = 1e-12
    if depth < max_depth and len(rows) >= 2 * min_leaf:
        for f in range(len(X[0])):
            for t in thresholds[f]:
                left = [r for r in rows if X[r][f] <= t]
                right = [r for r in rows if X[r][f] > t]
                if len(left) < min_leaf or len(right) < min_leaf:
                    continue
                GL = sum(g[r] for r in left)
                HL = sum(h[r] for r in left)
                GR = sum(g[r] for r in right)
                HR = sum(h[r] for r in right)
                gain = GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)
                if gain > best_gain + 1e-9 * abs(best_gain):
                    best_gain = gain
                    best = (f, t, left, right)
    if best is None:
        return ("leaf", -lr * G / (H + lam))
    f, t, left, right = best
    return ("split", f, t,
            build(X, g, h, left, depth + 1, thresholds, max_depth, min_leaf, lam, lr),
            build(X, g, h, right, depth + 1, thresholds, max_depth, min_leaf, lam, lr))


def evaluate(tree, row):
    while tree[0] == "split":
        _, f, t, left, right = tree
        tree = left if row[f] <= t else right
    return tree[1]


def boost(X, y, n_classes, rounds, lr, max_depth, min_leaf, lam):
    """Returns (base_scores, trees, per-round training log-loss)."""
    n = len(X)
    base = []
    for c in range(n_classes):
        prior = sum(1 for v in y if v == c) / n
        base.append(math.log(max(prior, 1e-15)))
    F = [list(base) for _ in range(n)]
    thresholds = [candidate_thresholds(X, f) for f in range(len(X[0]))]
    trees = []
    losses = []
    for _ in range(rounds):
        P = [softmax_row(F[i]) for i in range(n)]
        round_trees = []
        for c in range(n_classes):
            g = [P[i][c] - (1.0 if y[i] == c else 0.0) for i in range(n)]
            h = [max(P[i][c] * (1.0 - P[i][c]), 1e-16) for i in range(n)]
            round_trees.append(build(X, g, h, list(range(n)), 0, thresholds, max_depth, min_leaf, lam, lr))
        for c, tree in enumerate(round_trees):
            for i in range(n):
                F[i][c] += evaluate(tree, X[i])
        trees.append(round_trees)
        loss = 0.0
        for i in range(n):
            loss -= math.log(softmax_row(F[i])[y[i]])
        losses.append(loss / n)
    return base, trees, losses


def fixture(seed=20):
    """20 rows, 2 features, 3 classes."""
    rng = random.Random(seed)
    X, y = [], []
    for i in range(20):
        c = i % 3
        X.append([rng.gauss(c * 0.8, 1.0), rng.gauss(-c * 0.5, 1.0)])
        y.append(c)
    return X, y


if __name__ == "__main__":
    X, y = fixture()
    _, _, losses = boost(X, y, 3, rounds=10, lr=0.3, max_depth=2, min_leaf=2, lam=1.0)
    for r, loss in enumerate(losses, 1):
        print(r, repr(loss))
