"""Multinomial logistic regression trained with mini-batch Adam."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DegenerateLabelsError, FormatError, ShapeError
from .features import Array, FeatureMatrix
from .optim import Adam

FORMAT_VERSION = "authorprof-lr 1"


@dataclass
class LrConfig:
    l2_penalty: float = 1e-4
    epochs: int = 50
    learning_rate: float = 0.01
    batch_size: int = 64
    seed: int = 0
    tolerance: float = 1e-6

    def validate(self) -> None:
        if self.l2_penalty < 0 or self.epochs < 0:
            raise ConfigError("l2_penalty and epochs must be non-negative")
        if not (self.learning_rate > 0 and self.batch_size >= 1 and self.tolerance >= 0):
            raise ConfigError("learning_rate and batch_size must be positive")


@dataclass
class LrModel:
    weights: np.ndarray  # (classes, features)
    bias: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def save(self, path: str | Path) -> None:
        c, f = self.weights.shape
        lines = [FORMAT_VERSION, f"shape {c} {f}", "weights"]
        lines += [" ".join(f"{x:.17g}" for x in row) for row in self.weights]
        lines += ["bias", " ".join(f"{x:.17g}" for x in self.bias)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> LrModel:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != FORMAT_VERSION:
            raise FormatError("not an LR model file", str(path), 1)
        _, c, f = lines[1].split()
        c, f = int(c), int(f)
        rows = [np.array([float(x) for x in ln.split()]) if f else np.zeros(0) for ln in lines[3:3 + c]]
        weights = np.vstack(rows) if rows else np.zeros((0, f))
        bias = np.array([float(x) for x in lines[4 + c].split()])
        if weights.shape != (c, f) or bias.shape != (c,):
            raise FormatError("weight/bias shape mismatch", str(path))
        return cls(weights, bias)


def _values(X: FeatureMatrix | Array) -> Array:
    return X.values if isinstance(X, FeatureMatrix) else X


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def lr_objective(weights: np.ndarray, bias: np.ndarray, X: Array, y: np.ndarray,
                 l2_penalty: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradients."""
    n = X.shape[0]
    logits = np.asarray(X @ weights.T) + bias
    logits -= logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(logits).sum(axis=1))
    loss = float(np.mean(log_norm - logits[np.arange(n), y])) + 0.5 * l2_penalty * float(np.sum(weights ** 2))
    delta = np.exp(logits - log_norm[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    g_w = np.asarray(X.T @ delta).T + l2_penalty * weights
    g_b = delta.sum(axis=0)
    return loss, g_w, g_b


def lr_fit(X: FeatureMatrix | Array, y, cfg: LrConfig | None = None, n_classes: int = 3) -> LrModel:
    cfg = cfg or LrConfig()
    cfg.validate()
    X = _values(X)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise ShapeError("X and y have different row counts")
    if np.unique(y).size < 2:
        raise DegenerateLabelsError("logistic regression needs at least two classes")
    if sp.issparse(X):
        X = sp.csr_matrix(X)
    n, f = X.shape
    params = {"w": np.zeros((n_classes, f)), "b": np.zeros(n_classes)}
    opt = Adam(params, lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    history: list[float] = []
    prev = None
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, g_w, g_b = lr_objective(params["w"], params["b"], X[idx], y[idx], cfg.l2_penalty)
            opt.step({"w": g_w, "b": g_b})
        loss = lr_objective(params["w"], params["b"], X, y, cfg.l2_penalty)[0]
        history.append(loss)
        if prev is not None and abs(prev - loss) < cfg.tolerance:
            break
        prev = loss
    return LrModel(params["w"], params["b"], history)


def lr_predict(model: LrModel, X: FeatureMatrix | Array) -> np.ndarray:
    X = _values(X)
    if X.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return softmax(np.asarray(X @ model.weights.T) + model.bias)
