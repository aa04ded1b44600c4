"""Cross-validated comparison of the seven methods."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ExperimentConfig
from .evaluation import SignificanceResult, class_weights, compare, make_folds, weighted_scores
from .graph import CommunityGraph
from .methods import FoldContext, get_method, run_method
from .node2vec import AuthorProfileTable, embed_graph
from .text import LABELS, LabeledDocument

log = logging.getLogger(__name__)

SCORE_KEYS = ("precision", "recall", "f1")


@dataclass
class EvalReport:
    """Scores of one method across folds.

    ``per_class[f][c]`` is (P, R, F1) of class ``c`` on fold ``f``;
    ``weighted[f]`` is the class-weighted (P, R, F1) of fold ``f``.
    """

    method: str
    weights: tuple[float, ...]
    per_class: list[list[tuple[float, float, float]]] = field(default_factory=list)
    weighted: list[tuple[float, float, float]] = field(default_factory=list)

    def mean_weighted(self) -> tuple[float, float, float]:
        return tuple(float(np.mean([w[i] for w in self.weighted])) for i in range(3))

    def mean_per_class(self, c: int) -> tuple[float, float, float]:
        return tuple(float(np.mean([f[c][i] for f in self.per_class])) for i in range(3))

    def fold_f1(self) -> list[float]:
        return [w[2] for w in self.weighted]


@dataclass
class ExperimentResult:
    reports: dict[str, EvalReport]
    significance: list[SignificanceResult]
    config: ExperimentConfig
    weights: tuple[float, ...]
    timings: dict[str, float] = field(default_factory=dict)

    def report(self, method: str) -> EvalReport:
        return self.reports[method]

    def significance_of(self, a: str, b: str) -> SignificanceResult:
        for s in self.significance:
            if (s.method_a, s.method_b) == (a, b):
                return s
        raise KeyError((a, b))

    # -- rendering --------------------------------------------------------------------
    def records(self) -> list[dict]:
        digest = self.config.digest()
        out = []
        for name, rep in self.reports.items():
            for f, (per, w) in enumerate(zip(rep.per_class, rep.weighted)):
                for c, label in enumerate(LABELS):
                    out.append({"kind": "score", "method": name, "fold": f, "class": label,
                                **dict(zip(SCORE_KEYS, per[c])), "config": digest})
                out.append({"kind": "score", "method": name, "fold": f, "class": "weighted",
                            **dict(zip(SCORE_KEYS, w)), "config": digest})
        for s in self.significance:
            out.append({"kind": "significance", "method_a": s.method_a, "method_b": s.method_b,
                        "t": s.t if np.isfinite(s.t) else str(s.t), "df": s.df, "p": s.p_value,
                        "status": s.status, "differences": s.differences, "config": digest})
        return out

    def jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())

    def table(self) -> str:
        k = len(next(iter(self.reports.values())).weighted) if self.reports else 0
        w = ", ".join(f"{LABELS[i]} {x:.4f}" for i, x in enumerate(self.weights))
        lines = [f"config {self.config.digest()}  folds {k}  seed {self.config.seed}",
                 f"class weights: {w}", "",
                 "Weighted scores (mean over folds, %)",
                 f"{'method':<10}{'P':>8}{'R':>8}{'F1':>8}"]
        for name, rep in self.reports.items():
            p, r, f1 = rep.mean_weighted()
            lines.append(f"{name:<10}{100 * p:8.2f}{100 * r:8.2f}{100 * f1:8.2f}")
        lines += ["", "Per-class F1 (mean over folds, %)",
                  f"{'method':<10}" + "".join(f"{lab:>9}" for lab in LABELS)]
        for name, rep in self.reports.items():
            lines.append(f"{name:<10}" + "".join(f"{100 * rep.mean_per_class(c)[2]:9.2f}"
                                                for c in range(len(LABELS))))
        lines += ["", "Paired t-tests on fold weighted F1 (a - b)",
                  f"{'a':<10}{'b':<10}{'mean diff':>10}{'t':>10}{'p':>10}  status"]
        for s in self.significance:
            t = f"{s.t:10.3f}" if np.isfinite(s.t) else f"{s.t:>10}"
            lines.append(f"{s.method_a:<10}{s.method_b:<10}{100 * np.mean(s.differences):10.2f}"
                         f"{t}{s.p_value:10.4f}  {s.status}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
        reports = Path(out_dir) / "reports"
        reports.mkdir(parents=True, exist_ok=True)
        txt, jsonl = reports / f"{stem}.txt", reports / f"{stem}.jsonl"
        txt.write_text(self.table(), encoding="utf-8")
        jsonl.write_text(self.jsonl(), encoding="utf-8")
        return txt, jsonl


def run_experiment(docs: Sequence[LabeledDocument], graph: CommunityGraph,
                   config: ExperimentConfig | None = None, methods: Sequence[str] | None = None,
                   profiles: AuthorProfileTable | None = None) -> ExperimentResult:
    """k-fold CV of ``methods`` (default: the config's list) on ``docs``.

    Author profiles are trained once on the full graph unless supplied.
    Fold-local artifacts are rebuilt from each training split.
    """
    config = config or ExperimentConfig()
    config.validate()
    methods = tuple(methods or config.methods)
    specs = [get_method(m) for m in methods]
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    if profiles is None and any(s.profiles for s in specs):
        profiles = embed_graph(graph, config.walk)
    profiles = profiles or AuthorProfileTable(config.walk.dims)
    timings["profiles"] = time.perf_counter() - t0
    weights = tuple(float(x) for x in class_weights(docs))
    plan = make_folds(docs, config.folds, config.seed)
    reports = {m: EvalReport(m, weights) for m in methods}
    for f in range(config.folds):
        train_idx, test_idx = plan.train_test(f, len(docs))
        ctx = FoldContext([docs[i] for i in train_idx], [docs[i] for i in test_idx], profiles, config, f)
        gold = ctx.y_test
        for spec in specs:
            t = time.perf_counter()
            res = run_method(spec, ctx)
            timings[spec.name] = timings.get(spec.name, 0.0) + time.perf_counter() - t
            scores = weighted_scores(gold, res.probabilities.argmax(axis=1), weights, len(LABELS))
            reports[spec.name].per_class.append(scores["per_class"])
            reports[spec.name].weighted.append(tuple(scores[k] for k in SCORE_KEYS))
        log.info("fold %d/%d done", f + 1, config.folds)
    significance = [compare(reports[a].fold_f1(), reports[b].fold_f1(), a, b)
                    for a, b in combinations(methods, 2)]
    return ExperimentResult(reports, significance, config, weights, timings)
