"""The seven classification recipes and the per-fold artifacts they share."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .config import METHODS, ExperimentConfig
from .errors import ConfigError
from .evaluation import class_weights_from_labels
from .features import FeatureMatrix, concat_features
from .gbdt import GbdtModel, gbdt_fit, gbdt_predict, grid_search
from .gru import GruModel, extract_hidden_features, extract_tuned_embeddings, gru_train, init_model, predict_proba
from .linear import LrModel, lr_fit, lr_predict
from .node2vec import AuthorProfileTable
from .text import (LABELS, CharNgramVocabulary, LabeledDocument, WordEmbeddingTable, build_ngram_vocab,
                   build_vocabulary, char_ngram_matrix, embedding_sum_matrix, load_pretrained)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MethodSpec:
    name: str
    text_block: str | None     # "ngram" | "hidden_state" | "embedding_sum" | None
    profiles: bool
    classifier: str            # "logistic" | "gru" | "gbdt"


REGISTRY: dict[str, MethodSpec] = {
    "LR": MethodSpec("LR", "ngram", False, "logistic"),
    "HS": MethodSpec("HS", "hidden_state", False, "gru"),
    "WS": MethodSpec("WS", "embedding_sum", False, "gbdt"),
    "AUTH": MethodSpec("AUTH", None, True, "gbdt"),
    "LR+AUTH": MethodSpec("LR+AUTH", "ngram", True, "logistic"),
    "HS+AUTH": MethodSpec("HS+AUTH", "hidden_state", True, "gbdt"),
    "WS+AUTH": MethodSpec("WS+AUTH", "embedding_sum", True, "gbdt"),
}
assert tuple(REGISTRY) == METHODS


def get_method(name: str) -> MethodSpec:
    try:
        return REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHODS)}") from None


@dataclass
class FoldContext:
    """Training/test documents of one fold plus lazily built shared artifacts.

    Everything fitted here (n-gram vocabulary, embedding table, GRU) sees the
    training documents only.  Author profiles come from the whole graph.
    """

    train_docs: Sequence[LabeledDocument]
    test_docs: Sequence[LabeledDocument]
    profiles: AuthorProfileTable
    config: ExperimentConfig
    fold: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def y_train(self) -> np.ndarray:
        return np.array([d.label_index for d in self.train_docs], dtype=np.int64)

    @property
    def y_test(self) -> np.ndarray:
        return np.array([d.label_index for d in self.test_docs], dtype=np.int64)

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    # -- shared artifacts ---------------------------------------------------------
    def ngram_vocab(self) -> CharNgramVocabulary:
        return self._get("vocab", lambda: build_ngram_vocab(self.train_docs, self.config.ngram_raw_text))

    def initial_table(self) -> WordEmbeddingTable:
        cfg = self.config
        return self._get("table0", lambda: load_pretrained(
            cfg.embedding_file, build_vocabulary(self.train_docs), cfg.embedding_dims, seed=cfg.seed + self.fold))

    def gru_model(self) -> GruModel:
        def build():
            gcfg = replace(self.config.gru, seed=self.config.gru.seed + self.fold)
            model = init_model(self.initial_table(), gcfg, len(LABELS))
            return gru_train(model, self.train_docs)
        return self._get("gru", build)

    def tuned_table(self) -> WordEmbeddingTable:
        return self._get("table1", lambda: extract_tuned_embeddings(self.gru_model()))

    # -- feature blocks -------------------------------------------------------------
    def text_features(self, kind: str, split: str) -> FeatureMatrix:
        docs = self.train_docs if split == "train" else self.test_docs
        ids = [d.doc_id for d in docs]

        def build():
            if kind == "ngram":
                return FeatureMatrix.single(char_ngram_matrix(docs, self.ngram_vocab()), "ngram", ids)
            if kind == "hidden_state":
                return extract_hidden_features(self.gru_model(), docs)
            if kind == "embedding_sum":
                return FeatureMatrix.single(embedding_sum_matrix(docs, self.tuned_table()), "embedding_sum", ids)
            raise ConfigError(f"unknown feature block {kind!r}")
        return self._get(("text", kind, split), build)

    def profile_features(self, split: str) -> FeatureMatrix:
        docs = self.train_docs if split == "train" else self.test_docs
        return self._get(("auth", split), lambda: FeatureMatrix.single(
            self.profiles.matrix([d.author for d in docs]), "author_profile", [d.doc_id for d in docs]))

    def features(self, spec: MethodSpec, split: str) -> FeatureMatrix:
        parts = []
        if spec.text_block is not None:
            parts.append(self.text_features(spec.text_block, split))
        if spec.profiles:
            parts.append(self.profile_features(split))
        fm = parts[0]
        for p in parts[1:]:
            fm = concat_features(fm, p)
        return fm


@dataclass
class MethodResult:
    method: str
    probabilities: np.ndarray
    model: LrModel | GbdtModel | GruModel
    feature_width: int
    provenance: tuple[str, ...]
    gbdt_config: object = None


def run_method(spec: MethodSpec | str, ctx: FoldContext) -> MethodResult:
    """Train ``spec`` on the fold's training split and score its test split."""
    spec = get_method(spec) if isinstance(spec, str) else spec
    if spec.classifier == "gru":
        model = ctx.gru_model()
        return MethodResult(spec.name, predict_proba(model, ctx.test_docs), model,
                            model.hidden_units, ("hidden_state",))
    X_tr = ctx.features(spec, "train")
    X_te = ctx.features(spec, "test")
    y = ctx.y_train
    if spec.classifier == "logistic":
        model = lr_fit(X_tr, y, ctx.config.lr, len(LABELS))
        return MethodResult(spec.name, lr_predict(model, X_te), model, X_tr.width, X_tr.tags)
    cfg = ctx.config
    weights = class_weights_from_labels(y, len(LABELS))
    best, _ = grid_search(X_tr.dense(), y, cfg.gbdt_grid() or [cfg.gbdt], cfg.inner_folds,
                          cfg.seed + ctx.fold, len(LABELS), weights)
    model = gbdt_fit(X_tr.dense(), y, best, len(LABELS))
    return MethodResult(spec.name, gbdt_predict(model, X_te.dense()), model, X_tr.width, X_tr.tags, best)
