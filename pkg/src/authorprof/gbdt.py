"""Gradient-boosted decision trees with a softmax objective (Newton boosting).

Each round freezes the class probabilities, then grows one regression tree
per class on gradients ``p - 1{y=c}`` and hessians ``p(1-p)``.  Splits are
exact by default: every midpoint between consecutive distinct training
values of a feature is a candidate.  Setting ``max_bins`` keeps only a
quantile-spaced subset of those candidates, trading exactness for speed.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numba
import numpy as np

from .errors import ConfigError, DegenerateLabelsError, FormatError, ShapeError
from .features import FeatureMatrix

log = logging.getLogger(__name__)

FORMAT_VERSION = "authorprof-gbdt 1"
GAIN_EPS = 1e-12
# a later candidate must beat the incumbent by this relative margin, so gains
# that tie exactly resolve to the lowest (feature, threshold) despite rounding
TIE_REL = 1e-9
HESS_FLOOR = 1e-16
PRIOR_FLOOR = 1e-15


@dataclass(frozen=True)
class GbdtConfig:
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_samples_leaf: int = 10
    l2_leaf_reg: float = 1.0
    feature_subsample: float = 1.0
    seed: int = 0
    max_bins: int | None = None

    def validate(self) -> None:
        if self.rounds < 0:
            raise ConfigError("rounds must be >= 0")
        if self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ConfigError("max_depth and min_samples_leaf must be >= 1")
        if not self.learning_rate > 0 or self.l2_leaf_reg < 0:
            raise ConfigError("learning_rate must be positive and l2_leaf_reg non-negative")
        if not 0 < self.feature_subsample <= 1:
            raise ConfigError("feature_subsample must be in (0, 1]")
        if self.max_bins is not None and self.max_bins < 2:
            raise ConfigError("max_bins must be >= 2")


def default_grid(**overrides) -> list[GbdtConfig]:
    grid = [GbdtConfig(rounds=r, learning_rate=lr, max_depth=d, min_samples_leaf=m, l2_leaf_reg=1.0)
            for lr, d, m, r in itertools.product((0.05, 0.1), (3, 5), (10, 20), (100, 200))]
    return [replace(c, **overrides) for c in grid]


@dataclass
class GbdtModel:
    n_classes: int
    n_features: int
    base_score: np.ndarray
    # flattened trees; tree t occupies nodes tree_ptr[t]:tree_ptr[t+1], root first
    feature: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    threshold: np.ndarray = field(default_factory=lambda: np.zeros(0))
    left: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    right: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    value: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tree_ptr: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    loss_history: list[float] = field(default_factory=list)

    @property
    def n_trees(self) -> int:
        return len(self.tree_ptr) - 1

    @property
    def rounds(self) -> int:
        return self.n_trees // self.n_classes

    def tree_depth(self, t: int) -> int:
        start = self.tree_ptr[t]

        def depth(i: int) -> int:
            if self.feature[i] < 0:
                return 0
            return 1 + max(depth(start + self.left[i]), depth(start + self.right[i]))

        return depth(start)

    # -- persistence -----------------------------------------------------------
    def dumps(self) -> str:
        lines = [FORMAT_VERSION, f"classes {self.n_classes}", f"features {self.n_features}",
                 "base " + " ".join(f"{x:.17g}" for x in self.base_score), f"trees {self.n_trees}"]
        for t in range(self.n_trees):
            lines.append(f"tree {t // self.n_classes} {t % self.n_classes}")
            start = self.tree_ptr[t]
            stack = [0]
            while stack:
                i = stack.pop()
                j = start + i
                if self.feature[j] < 0:
                    lines.append(f"leaf {self.value[j]:.17g}")
                else:
                    lines.append(f"{self.feature[j]} {self.threshold[j]:.17g}")
                    stack.append(self.right[j])
                    stack.append(self.left[j])
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> GbdtModel:
        lines = text.splitlines()
        if not lines or lines[0] != FORMAT_VERSION:
            raise FormatError("not a GBDT model file")
        n_classes = int(lines[1].split()[1])
        n_features = int(lines[2].split()[1])
        base = np.array([float(x) for x in lines[3].split()[1:]])
        n_trees = int(lines[4].split()[1])
        feats: list[int] = []
        thrs: list[float] = []
        lefts: list[int] = []
        rights: list[int] = []
        vals: list[float] = []
        ptr = [0]
        pos = 5
        for _ in range(n_trees):
            pos += 1  # "tree r c" header
            local: list[list] = []

            def parse() -> int:
                nonlocal pos
                parts = lines[pos].split()
                pos += 1
                i = len(local)
                if parts[0] == "leaf":
                    local.append([-1, 0.0, -1, -1, float(parts[1])])
                else:
                    local.append([int(parts[0]), float(parts[1]), -1, -1, 0.0])
                    local[i][2] = parse()
                    local[i][3] = parse()
                return i

            parse()
            for f, th, lft, rgt, v in local:
                feats.append(f)
                thrs.append(th)
                lefts.append(lft)
                rights.append(rgt)
                vals.append(v)
            ptr.append(len(feats))
        return cls(n_classes, n_features, base, np.array(feats, dtype=np.int64), np.array(thrs),
                   np.array(lefts, dtype=np.int64), np.array(rights, dtype=np.int64), np.array(vals),
                   np.array(ptr, dtype=np.int64))

    @classmethod
    def load(cls, path: str | Path) -> GbdtModel:
        return cls.loads(Path(path).read_text(encoding="utf-8"))


# -- candidate thresholds -------------------------------------------------------------

def _feature_thresholds(col: np.ndarray, max_bins: int | None) -> np.ndarray:
    vals = np.unique(col)
    if vals.size < 2:
        return np.zeros(0)
    lo, hi = vals[:-1], vals[1:]
    mids = (lo + hi) / 2.0
    bad = ~((lo <= mids) & (mids < hi))
    mids[bad] = lo[bad]
    if max_bins is not None and mids.size > max_bins - 1:
        # quantile positions over the row distribution, mapped onto candidates
        qs = np.quantile(col, np.linspace(0, 1, max_bins + 1)[1:-1], method="lower")
        mids = np.unique(mids[np.clip(np.searchsorted(mids, qs, side="left"), 0, mids.size - 1)])
    return mids


@dataclass
class _Binned:
    codes: np.ndarray        # (F, n) flat bin index per cell, feature-major
    offsets: np.ndarray      # (F+1,) first flat bin of each feature
    thresholds: np.ndarray   # flat, threshold of bin b is thresholds[b]
    order: np.ndarray        # (F, n) rows sorted by code, per feature


def _bin_features(X: np.ndarray, max_bins: int | None) -> _Binned:
    n, f = X.shape
    offsets = np.zeros(f + 1, dtype=np.int64)
    codes = np.empty((f, n), dtype=np.int32)
    thr_parts = []
    for j in range(f):
        t = _feature_thresholds(X[:, j], max_bins)
        codes[j] = offsets[j] + np.searchsorted(t, X[:, j], side="left")
        offsets[j + 1] = offsets[j] + t.size + 1
        thr_parts.append(np.append(t, np.inf))
    thresholds = np.concatenate(thr_parts) if thr_parts else np.zeros(0)
    order = np.argsort(codes, axis=1, kind="stable").astype(np.int32)
    return _Binned(codes, offsets, thresholds, order)


# -- tree growth ---------------------------------------------------------------------

@numba.njit(cache=True)
def _grow_tree(codes, order, offsets, thresholds, g, h, features, max_depth, min_leaf, lam, lr, row_value):
    """Level-wise exact greedy tree.

    ``codes`` is feature-major ``(F, n)``; ``order[f]`` lists rows sorted by
    ``codes[f]``.  One sweep per feature per level evaluates every candidate
    split of every open node, so a level costs O(F * n) however many nodes
    it holds.  Leaf values for training rows are written into ``row_value``;
    node arrays come back in preorder.
    """
    n = codes.shape[1]
    max_nodes = 2 ** (max_depth + 1)
    feat = np.full(max_nodes, -1, dtype=np.int64)
    thr = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    val = np.zeros(max_nodes)
    slot_of_row = np.zeros(n, dtype=np.int64)
    slot_node = np.zeros(1, dtype=np.int64)
    hg = np.empty(n)
    hh = np.empty(n)
    hc = np.empty(n, dtype=np.int64)
    n_nodes = 1
    nf = features.shape[0]
    for depth in range(max_depth + 1):
        n_slots = slot_node.shape[0]
        G = np.zeros(n_slots)
        H = np.zeros(n_slots)
        cnt = np.zeros(n_slots, dtype=np.int64)
        for r in range(n):
            s = slot_of_row[r]
            if s >= 0:
                G[s] += g[r]
                H[s] += h[r]
                cnt[s] += 1
        open_ = np.zeros(n_slots, dtype=np.bool_)
        any_open = False
        if depth < max_depth:
            for s in range(n_slots):
                if cnt[s] >= 2 * min_leaf:
                    open_[s] = True
                    any_open = True
        best_gain = np.full(n_slots, GAIN_EPS)
        best_bin = np.full(n_slots, -1, dtype=np.int64)
        best_f = np.full(n_slots, -1, dtype=np.int64)
        if any_open:
            parent_score = np.zeros(n_slots)
            for s in range(n_slots):
                parent_score[s] = G[s] * G[s] / (H[s] + lam)
            GL = np.zeros(n_slots)
            HL = np.zeros(n_slots)
            NL = np.zeros(n_slots, dtype=np.int64)
            last = np.zeros(n_slots, dtype=np.int64)
            open_index = np.full(n_slots, -1, dtype=np.int64)
            n_open = 0
            for s in range(n_slots):
                if open_[s]:
                    open_index[s] = n_open
                    n_open += 1
            for k in range(nf):
                f = features[k]
                col = codes[f]
                off = offsets[f]
                n_bins = offsets[f + 1] - off
                if n_open * n_bins <= n:
                    # few distinct values: one sequential histogram pass
                    hg[:n_open * n_bins] = 0.0
                    hh[:n_open * n_bins] = 0.0
                    hc[:n_open * n_bins] = 0
                    for r in range(n):
                        s = slot_of_row[r]
                        if s < 0 or not open_[s]:
                            continue
                        j = open_index[s] * n_bins + col[r] - off
                        hg[j] += g[r]
                        hh[j] += h[r]
                        hc[j] += 1
                    for s in range(n_slots):
                        if not open_[s]:
                            continue
                        base = open_index[s] * n_bins
                        gl = 0.0
                        hl = 0.0
                        nl = 0
                        for b in range(n_bins - 1):
                            j = base + b
                            if hc[j] == 0:
                                continue
                            gl += hg[j]
                            hl += hh[j]
                            nl += hc[j]
                            if nl < min_leaf:
                                continue
                            if cnt[s] - nl < min_leaf:
                                break
                            gr = G[s] - gl
                            hr = H[s] - hl
                            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_score[s]
                            if gain > best_gain[s] + TIE_REL * abs(best_gain[s]):
                                best_gain[s] = gain
                                best_bin[s] = off + b
                                best_f[s] = f
                    continue
                ordf = order[f]
                GL[:] = 0.0
                HL[:] = 0.0
                NL[:] = 0
                for j in range(n):
                    r = ordf[j]
                    s = slot_of_row[r]
                    if s < 0 or not open_[s]:
                        continue
                    b = col[r]
                    if NL[s] > 0 and b != last[s]:
                        nl = NL[s]
                        if nl >= min_leaf and cnt[s] - nl >= min_leaf:
                            gl = GL[s]
                            hl = HL[s]
                            gr = G[s] - gl
                            hr = H[s] - hl
                            gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - parent_score[s]
                            if gain > best_gain[s] + TIE_REL * abs(best_gain[s]):
                                best_gain[s] = gain
                                best_bin[s] = last[s]
                                best_f[s] = f
                    GL[s] += g[r]
                    HL[s] += h[r]
                    NL[s] += 1
                    last[s] = b
        n_split = 0
        for s in range(n_slots):
            if best_f[s] >= 0:
                n_split += 1
        left_slot = np.full(n_slots, -1, dtype=np.int64)
        new_slot_node = np.zeros(2 * n_split, dtype=np.int64)
        ns = 0
        for s in range(n_slots):
            node = slot_node[s]
            if best_f[s] >= 0:
                feat[node] = best_f[s]
                thr[node] = thresholds[best_bin[s]]
                left[node] = n_nodes
                right[node] = n_nodes + 1
                new_slot_node[ns] = n_nodes
                new_slot_node[ns + 1] = n_nodes + 1
                left_slot[s] = ns
                n_nodes += 2
                ns += 2
            else:
                val[node] = -lr * G[s] / (H[s] + lam)
        for r in range(n):
            s = slot_of_row[r]
            if s < 0:
                continue
            if best_f[s] >= 0:
                if codes[best_f[s], r] <= best_bin[s]:
                    slot_of_row[r] = left_slot[s]
                else:
                    slot_of_row[r] = left_slot[s] + 1
            else:
                row_value[r] = val[slot_node[s]]
                slot_of_row[r] = -1
        slot_node = new_slot_node
        if n_split == 0:
            break
    # renumber to preorder with child links relative to the root
    new_id = np.full(n_nodes, -1, dtype=np.int64)
    stack = np.empty(n_nodes, dtype=np.int64)
    stack[0] = 0
    sp = 1
    counter = 0
    while sp > 0:
        sp -= 1
        i = stack[sp]
        new_id[i] = counter
        counter += 1
        if feat[i] >= 0:
            stack[sp] = right[i]
            stack[sp + 1] = left[i]
            sp += 2
    o_feat = np.full(n_nodes, -1, dtype=np.int64)
    o_thr = np.zeros(n_nodes)
    o_left = np.full(n_nodes, -1, dtype=np.int64)
    o_right = np.full(n_nodes, -1, dtype=np.int64)
    o_val = np.zeros(n_nodes)
    for i in range(n_nodes):
        j = new_id[i]
        o_feat[j] = feat[i]
        o_thr[j] = thr[i]
        o_val[j] = val[i]
        if feat[i] >= 0:
            o_left[j] = new_id[left[i]]
            o_right[j] = new_id[right[i]]
    return o_feat, o_thr, o_left, o_right, o_val


@numba.njit(cache=True)
def _predict_raw(X, base, feature, threshold, left, right, value, tree_ptr, n_classes, n_trees):
    n = X.shape[0]
    out = np.empty((n, n_classes))
    for i in range(n):
        for c in range(n_classes):
            out[i, c] = base[c]
        for t in range(n_trees):
            j = tree_ptr[t]
            start = j
            while feature[j] >= 0:
                if X[i, feature[j]] <= threshold[j]:
                    j = start + left[j]
                else:
                    j = start + right[j]
            out[i, t % n_classes] += value[j]
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_loss(raw: np.ndarray, y: np.ndarray) -> float:
    z = raw - raw.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(y)), y]))


def _dense(X) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.dense()
    if hasattr(X, "toarray"):
        return X.toarray()
    return np.ascontiguousarray(np.asarray(X, dtype=float))


def gbdt_fit(X, y, cfg: GbdtConfig | None = None, n_classes: int = 3) -> GbdtModel:
    cfg = cfg or GbdtConfig()
    cfg.validate()
    X = _dense(X)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError("X must be 2-D with one row per label")
    if np.unique(y).size < 2:
        raise DegenerateLabelsError("boosting needs at least two distinct labels")
    if y.min() < 0 or y.max() >= n_classes:
        raise ShapeError("labels must lie in [0, n_classes)")
    n, f = X.shape
    prior = np.bincount(y, minlength=n_classes) / n
    base = np.log(np.maximum(prior, PRIOR_FLOOR))
    binned = _bin_features(X, cfg.max_bins)
    rng = np.random.default_rng(cfg.seed)
    all_features = np.arange(f, dtype=np.int64)
    n_sub = max(1, int(round(f * cfg.feature_subsample)))
    raw = np.tile(base, (n, 1))
    onehot = np.eye(n_classes)[y]
    parts: list[tuple[np.ndarray, ...]] = []
    history = []
    row_value = np.zeros(n)
    for _ in range(cfg.rounds):
        p = _softmax(raw)
        grads = p - onehot
        hess = np.maximum(p * (1.0 - p), HESS_FLOOR)
        update = np.zeros_like(raw)
        for c in range(n_classes):
            feats = all_features
            if n_sub < f:
                feats = np.sort(rng.choice(f, size=n_sub, replace=False)).astype(np.int64)
            tree = _grow_tree(binned.codes, binned.order, binned.offsets, binned.thresholds,
                              np.ascontiguousarray(grads[:, c]), np.ascontiguousarray(hess[:, c]),
                              feats, cfg.max_depth, cfg.min_samples_leaf, float(cfg.l2_leaf_reg),
                              float(cfg.learning_rate), row_value)
            parts.append(tree)
            update[:, c] = row_value
        raw += update
        history.append(_log_loss(raw, y))
    model = GbdtModel(n_classes, f, base, loss_history=history)
    if parts:
        sizes = [len(t[0]) for t in parts]
        model.tree_ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        model.feature = np.concatenate([t[0] for t in parts])
        model.threshold = np.concatenate([t[1] for t in parts])
        model.left = np.concatenate([t[2] for t in parts])
        model.right = np.concatenate([t[3] for t in parts])
        model.value = np.concatenate([t[4] for t in parts])
    return model


def gbdt_predict_raw(model: GbdtModel, X, rounds: int | None = None) -> np.ndarray:
    X = _dense(X)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got {X.shape[-1]}")
    n_trees = model.n_trees if rounds is None else min(model.n_trees, rounds * model.n_classes)
    return _predict_raw(X, model.base_score, model.feature, model.threshold, model.left,
                        model.right, model.value, model.tree_ptr, model.n_classes, n_trees)


def gbdt_predict(model: GbdtModel, X, rounds: int | None = None) -> np.ndarray:
    """Class probabilities; ``rounds`` truncates the ensemble (staged prediction)."""
    return _softmax(gbdt_predict_raw(model, X, rounds))


# -- model selection ----------------------------------------------------------------

def grid_search(X, y, grid: Sequence[GbdtConfig], folds: int = 5, seed: int = 0,
                n_classes: int = 3, class_weights: np.ndarray | None = None
                ) -> tuple[GbdtConfig, list[tuple[GbdtConfig, float]]]:
    """Pick the config with the best mean inner-CV weighted F1.

    Only the rows passed in are used.  Configs that differ only in
    ``rounds`` share one fit, scored on staged predictions.  Ties go to
    fewer rounds, then shallower trees, then grid order.
    """
    from .evaluation import class_weights_from_labels, make_folds_from_labels, weighted_scores

    if not grid:
        raise ConfigError("empty grid")
    if len(grid) == 1:
        return grid[0], []
    X = _dense(X)
    y = np.asarray(y, dtype=np.int64)
    weights = class_weights if class_weights is not None else class_weights_from_labels(y, n_classes)
    plan = make_folds_from_labels(y, folds, seed)
    groups: dict[tuple, list[int]] = {}
    for i, c in enumerate(grid):
        key = tuple(sorted((k, v) for k, v in asdict(c).items() if k != "rounds"))
        groups.setdefault(key, []).append(i)
    totals = np.zeros(len(grid))
    for fold in range(folds):
        test = plan[fold]
        train = np.setdiff1d(np.arange(len(y)), test)
        for members in groups.values():
            most = max(grid[i].rounds for i in members)
            model = gbdt_fit(X[train], y[train], replace(grid[members[0]], rounds=most), n_classes)
            for i in members:
                pred = gbdt_predict(model, X[test], rounds=grid[i].rounds).argmax(axis=1)
                totals[i] += weighted_scores(y[test], pred, weights, n_classes)["f1"]
    means = totals / folds
    order = sorted(range(len(grid)), key=lambda i: (-means[i], grid[i].rounds, grid[i].max_depth, i))
    scored = [(grid[i], float(means[i])) for i in range(len(grid))]
    log.debug("grid search best %s (F1 %.4f)", grid[order[0]], means[order[0]])
    return grid[order[0]], scored
