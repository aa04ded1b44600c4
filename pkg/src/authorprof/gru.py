"""Stacked GRU text classifier with hand-written backpropagation through time.

Gate convention (per layer, per step)::

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    c = tanh(x Wc + (r * h) Uc + bc)
    h' = z * h + (1 - z) * c

Padded steps carry the previous state through unchanged, so the final
state of every sequence is the state after its last real token.  The
softmax head reads the top layer's final state.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateSplitError, FormatError
from .features import FeatureMatrix
from .optim import Adam
from .text import LABELS, LabeledDocument, WordEmbeddingTable

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class GruConfig:
    hidden_units: int = 128
    layers: int = 2
    dropout_rate: float = 0.2
    epochs: int = 50
    patience: int = 5
    batch_size: int = 32
    validation_fraction: float = 0.1
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def validate(self) -> None:
        if self.hidden_units < 1 or self.layers < 1 or self.batch_size < 1:
            raise ConfigError("hidden_units, layers and batch_size must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError("dropout_rate must be in [0, 1)")
        if not 0 < self.validation_fraction < 0.5:
            raise ConfigError("validation_fraction must be in (0, 0.5)")
        if self.epochs < 0 or self.patience < 1 or not self.learning_rate > 0:
            raise ConfigError("bad epochs/patience/learning_rate")


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class GruModel:
    config: GruConfig
    table: WordEmbeddingTable
    params: dict[str, np.ndarray]
    n_classes: int = 3
    initial_embeddings: np.ndarray | None = None
    log: list[dict] = field(default_factory=list)

    @property
    def hidden_units(self) -> int:
        return self.params["Wo"].shape[0]

    @property
    def n_layers(self) -> int:
        return sum(1 for k in self.params if k.startswith("W") and k[1:].isdigit())

    # -- persistence --------------------------------------------------------------
    def save(self, path: str | Path) -> None:
        arrays = {f"param_{k}": v for k, v in self.params.items()}
        np.savez(path if str(path).endswith(".npz") else str(path),
                 version=np.array(CHECKPOINT_VERSION),
                 config=np.array(json.dumps(asdict(self.config), sort_keys=True)),
                 n_classes=np.array(self.n_classes),
                 tokens=np.array(self.table.tokens, dtype=str),
                 pretrained=self.table.pretrained,
                 **arrays)

    @classmethod
    def load(cls, path: str | Path) -> GruModel:
        with np.load(path, allow_pickle=False) as z:
            if int(z["version"]) != CHECKPOINT_VERSION:
                raise FormatError(f"unsupported GRU checkpoint version {int(z['version'])}", str(path))
            cfg = GruConfig(**json.loads(str(z["config"])))
            params = {k[len("param_"):]: z[k].copy() for k in z.files if k.startswith("param_")}
            tokens = tuple(str(t) for t in z["tokens"])
            table = WordEmbeddingTable(tokens, params["E"], z["pretrained"].copy())
            return cls(cfg, table, params, int(z["n_classes"]))


def init_model(table: WordEmbeddingTable, cfg: GruConfig | None = None, n_classes: int = 3) -> GruModel:
    """Fresh model around ``table``; the table's matrix becomes parameter ``E``."""
    cfg = cfg or GruConfig()
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    H = cfg.hidden_units
    params: dict[str, np.ndarray] = {"E": table.matrix.copy()}
    fan_in = table.dims
    for layer in range(cfg.layers):
        params[f"W{layer}"] = np.hstack([glorot(rng, fan_in, H) for _ in range(3)])
        params[f"U{layer}"] = np.hstack([glorot(rng, H, H) for _ in range(3)])
        params[f"b{layer}"] = np.zeros(3 * H)
        fan_in = H
    params["Wo"] = glorot(rng, H, n_classes)
    params["bo"] = np.zeros(n_classes)
    table = WordEmbeddingTable(table.tokens, params["E"], table.pretrained.copy())
    return GruModel(cfg, table, params, n_classes, params["E"].copy())


def encode_batch(table: WordEmbeddingTable, token_lists: Sequence[Sequence[str]]) -> tuple[np.ndarray, np.ndarray]:
    """Right-padded id matrix and 0/1 mask; empty documents become a lone OOV."""
    seqs = [table.ids(toks) or [table.oov_index] for toks in token_lists]
    T = max(len(s) for s in seqs)
    ids = np.full((len(seqs), T), table.oov_index, dtype=np.int64)
    mask = np.zeros((len(seqs), T))
    for i, s in enumerate(seqs):
        ids[i, :len(s)] = s
        mask[i, :len(s)] = 1.0
    return ids, mask


def _layer_forward(X: np.ndarray, mask: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray):
    B, T, _ = X.shape
    H = U.shape[0]
    XW = X @ W + b
    h = np.zeros((B, H))
    hs = np.empty((B, T, H))
    cache = {k: np.empty((B, T, H)) for k in ("hprev", "z", "r", "c", "rh")}
    Uzr, Uc = U[:, :2 * H], U[:, 2 * H:]
    for t in range(T):
        a = XW[:, t]
        zr = _sigmoid(a[:, :2 * H] + h @ Uzr)
        z, r = zr[:, :H], zr[:, H:]
        rh = r * h
        c = np.tanh(a[:, 2 * H:] + rh @ Uc)
        m = mask[:, t:t + 1]
        hnew = z * h + (1.0 - z) * c
        cache["hprev"][:, t] = h
        cache["z"][:, t] = z
        cache["r"][:, t] = r
        cache["c"][:, t] = c
        cache["rh"][:, t] = rh
        h = m * hnew + (1.0 - m) * h
        hs[:, t] = h
    return hs, cache


def _layer_backward(X, mask, W, U, cache, dhs, dh_last):
    """Gradients for one layer given dL/d(output sequence) and dL/d(final state)."""
    B, T, _ = X.shape
    H = U.shape[0]
    Uzr, Uc = U[:, :2 * H], U[:, 2 * H:]
    DA = np.zeros((B, T, 3 * H))
    dh = dh_last.copy()
    for t in range(T - 1, -1, -1):
        if dhs is not None:
            dh = dh + dhs[:, t]
        m = mask[:, t:t + 1]
        hprev = cache["hprev"][:, t]
        z = cache["z"][:, t]
        r = cache["r"][:, t]
        c = cache["c"][:, t]
        dhn = m * dh
        dprev = (1.0 - m) * dh + dhn * z
        dz = dhn * (hprev - c)
        dac = dhn * (1.0 - z) * (1.0 - c * c)
        drh = dac @ Uc.T
        dr = drh * hprev
        dprev += drh * r
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        dazr = np.concatenate([daz, dar], axis=1)
        dprev += dazr @ Uzr.T
        DA[:, t, :2 * H] = dazr
        DA[:, t, 2 * H:] = dac
        dh = dprev
    flatX = X.reshape(B * T, -1)
    flatDA = DA.reshape(B * T, 3 * H)
    dW = flatX.T @ flatDA
    db = flatDA.sum(axis=0)
    dU = np.empty_like(U)
    dU[:, :2 * H] = cache["hprev"].reshape(B * T, H).T @ flatDA[:, :2 * H]
    dU[:, 2 * H:] = cache["rh"].reshape(B * T, H).T @ flatDA[:, 2 * H:]
    dX = DA @ W.T
    return dW, dU, db, dX


def _dropout_mask(rng: np.random.Generator | None, shape, rate: float) -> np.ndarray | None:
    if rng is None or rate <= 0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def forward(model: GruModel, ids: np.ndarray, mask: np.ndarray, rng: np.random.Generator | None = None):
    """Batched forward pass.  ``rng`` switches on dropout (training mode).

    Returns ``(layer_outputs, final_state, probabilities, cache)``.
    """
    p = model.params
    rate = model.config.dropout_rate
    X = p["E"][ids]
    inputs, caches, drops, outputs = [], [], [], []
    for layer in range(model.n_layers):
        inputs.append(X)
        hs, cache = _layer_forward(X, mask, p[f"W{layer}"], p[f"U{layer}"], p[f"b{layer}"])
        caches.append(cache)
        outputs.append(hs)
        drop = _dropout_mask(rng, hs.shape, rate)
        drops.append(drop)
        X = hs if drop is None else hs * drop
    h_n = outputs[-1][:, -1]
    # the top layer's dropout acts on h_n only (before the softmax head)
    top_drop = drops[-1][:, -1] if drops[-1] is not None else None
    feat = h_n if top_drop is None else h_n * top_drop
    logits = feat @ p["Wo"] + p["bo"]
    logits = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=1, keepdims=True)
    cache = {"ids": ids, "mask": mask, "inputs": inputs, "caches": caches, "drops": drops,
             "feat": feat, "top_drop": top_drop}
    return outputs, h_n, probs, cache


def loss_and_grads(model: GruModel, ids: np.ndarray, mask: np.ndarray, y: np.ndarray,
                   rng: np.random.Generator | None = None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy of a batch and gradients for every parameter."""
    p = model.params
    _, _, probs, cache = forward(model, ids, mask, rng)
    B = ids.shape[0]
    loss = float(-np.mean(np.log(probs[np.arange(B), y])))
    dlogits = probs.copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits /= B
    grads = {"Wo": cache["feat"].T @ dlogits, "bo": dlogits.sum(axis=0)}
    dh_last = dlogits @ p["Wo"].T
    if cache["top_drop"] is not None:
        dh_last = dh_last * cache["top_drop"]
    dhs = None
    for layer in range(model.n_layers - 1, -1, -1):
        dW, dU, db, dX = _layer_backward(cache["inputs"][layer], mask, p[f"W{layer}"], p[f"U{layer}"],
                                         cache["caches"][layer], dhs, dh_last)
        grads[f"W{layer}"], grads[f"U{layer}"], grads[f"b{layer}"] = dW, dU, db
        if layer > 0:
            drop = cache["drops"][layer - 1]
            dhs = dX if drop is None else dX * drop
            dh_last = np.zeros_like(dh_last)
    dE = np.zeros_like(p["E"])
    np.add.at(dE, ids.ravel(), dX.reshape(-1, dX.shape[-1]))
    grads["E"] = dE
    return loss, grads


def gru_forward(model: GruModel, tokens: Sequence[str]):
    """Single document, inference mode: (per-layer states, h_n, class probabilities)."""
    ids, mask = encode_batch(model.table, [tokens])
    outputs, h_n, probs, _ = forward(model, ids, mask)
    return [o[0] for o in outputs], h_n[0], probs[0]


def stratified_holdout(labels: Sequence[int], fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Split indices into (train, validation) with per-class largest-remainder quotas."""
    y = np.asarray(labels)
    n_val = int(round(len(y) * fraction))
    classes, counts = np.unique(y, return_counts=True)
    exact = counts * n_val / len(y)
    quota = np.floor(exact).astype(int)
    for i in np.argsort(-(exact - quota), kind="stable")[: n_val - quota.sum()]:
        quota[i] += 1
    quota = np.minimum(quota, counts - 1)
    rng = np.random.default_rng(seed)
    val = []
    for c, q in zip(classes, quota):
        members = np.flatnonzero(y == c)
        val.extend(members[rng.permutation(members.size)[:q]].tolist())
    val_idx = np.array(sorted(val), dtype=np.int64)
    train_mask = np.ones(len(y), dtype=bool)
    train_mask[val_idx] = False
    return np.flatnonzero(train_mask), val_idx


def _mean_loss(model: GruModel, token_lists, y, batch_size: int) -> float:
    total = 0.0
    for start in range(0, len(y), batch_size):
        ids, mask = encode_batch(model.table, token_lists[start:start + batch_size])
        _, _, probs, _ = forward(model, ids, mask)
        yy = y[start:start + batch_size]
        total -= float(np.sum(np.log(probs[np.arange(len(yy)), yy])))
    return total / max(len(y), 1)


def gru_train(model: GruModel, docs: Sequence[LabeledDocument]) -> GruModel:
    """Adam + BPTT with a stratified validation holdout and early stopping.

    The model is updated in place (and returned); on exit its parameters are
    the snapshot with the lowest validation loss.
    """
    cfg = model.config
    cfg.validate()
    y = np.array([d.label_index for d in docs], dtype=np.int64)
    missing = [LABELS[c] for c in range(model.n_classes) if not np.any(y == c)]
    if missing:
        raise DegenerateSplitError(f"training split has no documents of class {missing}")
    tokens = [d.tokens for d in docs]
    tr, va = stratified_holdout(y, cfg.validation_fraction, cfg.seed)
    tr_tokens = [tokens[i] for i in tr]
    va_tokens = [tokens[i] for i in va]
    y_tr, y_va = y[tr], y[va]
    rng = np.random.default_rng(cfg.seed + 1)
    opt = Adam(model.params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    best = (np.inf, copy.deepcopy(model.params), 0)
    since_best = 0
    model.log = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(tr))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            ids, mask = encode_batch(model.table, [tr_tokens[i] for i in batch])
            loss, grads = loss_and_grads(model, ids, mask, y_tr[batch], rng)
            opt.step(grads)
            total += loss * len(batch)
        val_loss = _mean_loss(model, va_tokens, y_va, 256) if len(va) else total / len(tr)
        model.log.append({"epoch": epoch, "train_loss": total / len(tr), "val_loss": val_loss})
        log.debug("gru epoch %d train %.4f val %.4f", epoch, total / len(tr), val_loss)
        if val_loss < best[0]:
            best = (val_loss, copy.deepcopy(model.params), epoch)
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    if np.isfinite(best[0]):
        for k, v in best[1].items():
            model.params[k][...] = v
    model.log.append({"best_epoch": best[2], "best_val_loss": best[0]})
    return model


def predict_proba(model: GruModel, docs: Sequence[LabeledDocument], batch_size: int = 256) -> np.ndarray:
    out = []
    for start in range(0, len(docs), batch_size):
        ids, mask = encode_batch(model.table, [d.tokens for d in docs[start:start + batch_size]])
        out.append(forward(model, ids, mask)[2])
    return np.vstack(out) if out else np.zeros((0, model.n_classes))


def extract_hidden_features(model: GruModel, docs: Sequence[LabeledDocument],
                            batch_size: int = 256) -> FeatureMatrix:
    """Top-layer final state per document (dropout off)."""
    rows = []
    for start in range(0, len(docs), batch_size):
        ids, mask = encode_batch(model.table, [d.tokens for d in docs[start:start + batch_size]])
        rows.append(forward(model, ids, mask)[1])
    values = np.vstack(rows) if rows else np.zeros((0, model.hidden_units))
    return FeatureMatrix.single(values, "hidden_state", [d.doc_id for d in docs])


def extract_tuned_embeddings(model: GruModel) -> WordEmbeddingTable:
    return WordEmbeddingTable(model.table.tokens, model.params["E"].copy(), model.table.pretrained.copy())
