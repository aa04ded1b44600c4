"""Acceptance criteria, one test per criterion.

Every test records a PASS/FAIL (or SKIP) line that the terminal summary
prints at the end of the run (see ``conftest.py``).  Run on its own with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.

Criterion 5 trains on five synthetic corpora twice over and takes about half
an hour on one core.  Criterion 7 runs only when ``AUTHORPROF_DOCS`` and
``AUTHORPROF_EDGES`` point at re-hydrated data (``AUTHORPROF_AUTHORS`` is
optional).
"""

import math
import os
import sys
import time
from collections import Counter
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln
from scipy.stats import chisquare

sys.path.insert(0, str(Path(__file__).parent / "oracles"))

import gbdt_reference as ref  # noqa: E402
from authorprof.cli import main  # noqa: E402
from authorprof.config import desk_config, full_config  # noqa: E402
from authorprof.evaluation import (class_metrics, class_weights, make_folds_from_labels,  # noqa: E402
                                   paired_t_test, t_two_tailed_p, weighted_metric)
from authorprof.gbdt import GbdtConfig, GbdtModel, gbdt_fit, gbdt_predict  # noqa: E402
from authorprof.graph import CommunityGraph  # noqa: E402
from authorprof.gru import GruConfig, GruModel, encode_batch, init_model, loss_and_grads  # noqa: E402
from authorprof.linear import LrModel, lr_objective  # noqa: E402
from authorprof.methods import REGISTRY, FoldContext  # noqa: E402
from authorprof.experiment import run_experiment  # noqa: E402
from authorprof.node2vec import AuthorProfileTable, WalkConfig, generate_walks, sgns_loss_and_grad  # noqa: E402
from authorprof.synthetic import SyntheticSpec, default_spec, generate_synthetic, null_spec  # noqa: E402
from authorprof.text import LABELS, LabeledDocument, WordEmbeddingTable  # noqa: E402

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def _central_diff(f, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], h=1e-5) -> float:
    worst = 0.0
    for name, p in params.items():
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            keep = p[idx]
            p[idx] = keep + h
            up = f()
            p[idx] = keep - h
            down = f()
            p[idx] = keep
            num[idx] = (up - down) / (2 * h)
        denom = max(np.linalg.norm(num) + np.linalg.norm(grads[name]), 1e-12)
        worst = max(worst, float(np.linalg.norm(num - grads[name]) / denom))
    return worst


# -- 1 ------------------------------------------------------------------------------------

def test_criterion_1_gradient_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)

    sg = {"center": rng.normal(0, 0.5, 6), "context": rng.normal(0, 0.5, 6), "negatives": rng.normal(0, 0.5, (4, 6))}
    _, gc, go, gn = sgns_loss_and_grad(sg["center"], sg["context"], sg["negatives"])
    err_sg = _central_diff(lambda: sgns_loss_and_grad(sg["center"], sg["context"], sg["negatives"])[0], sg,
                           {"center": gc, "context": go, "negatives": gn})

    X = rng.normal(size=(8, 5))
    y = rng.integers(0, 3, 8)
    lr = {"w": rng.normal(size=(3, 5)), "b": rng.normal(size=3)}
    _, gw, gb = lr_objective(lr["w"], lr["b"], X, y, 0.1)
    err_lr = _central_diff(lambda: lr_objective(lr["w"], lr["b"], X, y, 0.1)[0], lr, {"w": gw, "b": gb})

    table = WordEmbeddingTable(tuple("abcdef"), rng.uniform(-0.5, 0.5, (7, 4)), np.zeros(7, dtype=bool))
    model = init_model(table, GruConfig(hidden_units=3, layers=2, dropout_rate=0.0, seed=1))
    for k, v in model.params.items():
        if k.startswith("b"):
            v[:] = rng.normal(0, 0.3, v.shape)
    ids, mask = encode_batch(table, [["a", "b", "c"], ["d"], ["e", "f", "a", "zz"], ["b", "b"]])
    yg = np.array([0, 1, 2, 1])
    _, grads = loss_and_grads(model, ids, mask, yg, None)
    err_gru = _central_diff(lambda: loss_and_grads(model, ids, mask, yg, None)[0], model.params, grads)
    groups = sorted(model.params)

    elapsed = time.perf_counter() - t0
    worst = max(err_sg, err_lr, err_gru)
    record(1, worst < 1e-4 and elapsed < 30 and len(groups) == 9,
           f"max rel err sgns {err_sg:.1e}, lr {err_lr:.1e}, gru {err_gru:.1e} ({len(groups)} groups); "
           f"{elapsed:.1f}s")


# -- 2 ------------------------------------------------------------------------------------

def test_criterion_2_gbdt_oracle():
    X, y = ref.fixture()
    _, _, expected = ref.boost(X, y, 3, rounds=10, lr=0.3, max_depth=2, min_leaf=2, lam=1.0)
    model = gbdt_fit(np.array(X), np.array(y), GbdtConfig(rounds=10, learning_rate=0.3, max_depth=2,
                                                          min_samples_leaf=2, l2_leaf_reg=1.0), 3)
    diff = float(np.max(np.abs(np.array(model.loss_history) - expected)))
    record(2, len(model.loss_history) == 10 and diff < 1e-9, f"max per-round log-loss diff {diff:.1e} over 10 rounds")


# -- 3 ------------------------------------------------------------------------------------

def _next_after(g, cfg, prev, cur, n):
    out = []
    for w in generate_walks(g, cfg).walks:
        for i in range(1, len(w) - 1):
            if w[i - 1] == prev and w[i] == cur:
                out.append(w[i + 1])
    return out[:n]


def test_criterion_3_walk_bias():
    g = CommunityGraph.from_edges([("a", "b"), ("b", "c"), ("a", "c"), ("c", "d")])
    steps = _next_after(g, WalkConfig(p=1.0, q=0.5, walk_length=60, walks_per_node=4000, seed=11), "b", "c", 100_000)
    freq = Counter(steps)
    emp = np.array([freq[x] for x in ("b", "a", "d")]) / max(len(steps), 1)
    dev = float(np.max(np.abs(emp - [0.25, 0.25, 0.5])))
    uniform = Counter(_next_after(g, WalkConfig(walk_length=60, walks_per_node=1500, seed=5), "b", "c", 20_000))
    p = float(chisquare([uniform[x] for x in ("a", "b", "d")]).pvalue)
    record(3, len(steps) == 100_000 and dev <= 0.01 and p > 0.01,
           f"b->c->(b,a,d) = ({emp[0]:.4f}, {emp[1]:.4f}, {emp[2]:.4f}) over {len(steps)} steps, "
           f"max dev {dev:.4f}; p=q=1 chi-square p = {p:.3f}")


# -- 4 ------------------------------------------------------------------------------------

def _t_tail(t, df):
    log_c = gammaln((df + 1) / 2) - gammaln(df / 2) - 0.5 * math.log(df * math.pi)
    return 2 * integrate.quad(lambda x: math.exp(log_c - (df + 1) / 2 * math.log1p(x * x / df)), abs(t), np.inf,
                              epsabs=1e-14, epsrel=1e-12)[0]


def test_criterion_4_metric_oracles():
    w845 = weighted_metric((0.5, 0.5, 1.0), (0.12, 0.19, 0.69))
    prf = class_metrics([1, 1, 1, 0, 0], [1, 1, 0, 1, 1], 1)
    hand = abs(w845 - 0.845) < 1e-12 and np.allclose(prf, (2 / 3, 1 / 2, 4 / 7), atol=1e-15)
    p_err = max(abs(t_two_tailed_p(t, df) - _t_tail(t, df))
                for t in (0.0, 0.5, 1.0, 2.262, 3.0, 6.0) for df in (1, 2, 5, 9, 29))
    a = np.random.default_rng(1).normal(0.8, 0.02, 10)
    b = a - np.random.default_rng(2).normal(0.01, 0.01, 10)
    r = paired_t_test(a, b)
    p_err = max(p_err, abs(r.p_value - _t_tail(r.t, 9)))
    spread = 0
    for counts, k in (((1939, 3148, 11115), 10), ((10, 10, 10), 10), ((13, 29, 57), 5)):
        y = np.repeat([0, 1, 2], counts)
        folds = make_folds_from_labels(y, k, seed=0)
        for c in range(3):
            per = [int(np.sum(y[f] == c)) for f in folds]
            spread = max(spread, max(per) - min(per))
    record(4, hand and p_err < 1e-6 and spread <= 1,
           f"0.845 case -> {w845:.12g}; (P,R,F1) = ({prf[0]:.4f}, {prf[1]:.4f}, {prf[2]:.4f}); "
           f"max |p - quad| {p_err:.1e}; max per-class fold spread {spread}")


# -- 5 ------------------------------------------------------------------------------------

SEEDS = (1, 2, 3, 4, 5)
CORE = ("LR", "LR+AUTH", "AUTH")


def _run(spec, seed, methods):
    corpus = generate_synthetic(spec)
    t0 = time.perf_counter()
    res = run_experiment(corpus.documents, corpus.graph, desk_config().with_seed(seed), methods=methods)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def central_claim():
    out = {"default": [], "null": [], "full_seconds": None}
    for seed in SEEDS:
        for name, spec in (("default", default_spec(seed)), ("null", null_spec(seed))):
            full = name == "default" and seed == SEEDS[0]
            res, secs = _run(spec, seed, None if full else CORE)
            if full:
                out["full_seconds"] = secs
            out[name].append({
                "lr": 100 * res.report("LR").mean_weighted()[2],
                "both": 100 * res.report("LR+AUTH").mean_weighted()[2],
                "auth_f1": [res.report("AUTH").mean_per_class(c)[2] for c in range(2)],
                "share": list(res.weights[:2]),
            })
            r = out[name][-1]
            print(f"  {name:<7} seed {seed}: LR {r['lr']:.2f}  LR+AUTH {r['both']:.2f}  "
                  f"AUTH racism/sexism F1 {r['auth_f1'][0]:.3f}/{r['auth_f1'][1]:.3f}  ({secs:.0f}s)")
    return out


def test_criterion_5_central_claim(central_claim):
    d, n = central_claim["default"], central_claim["null"]
    gap = float(np.mean([r["both"] - r["lr"] for r in d]))
    null_gap = float(np.mean([r["both"] - r["lr"] for r in n]))
    auth = np.mean([r["auth_f1"] for r in d], axis=0)
    chance = np.mean([r["share"] for r in d], axis=0)
    secs = central_claim["full_seconds"]
    ok = gap >= 2.0 and bool(np.all(auth > chance)) and null_gap < 1.0 and secs < 600
    record(5, ok,
           f"default LR+AUTH - LR = {gap:+.2f} (need >= 2); AUTH F1 racism {auth[0]:.3f} vs chance {chance[0]:.3f}, "
           f"sexism {auth[1]:.3f} vs {chance[1]:.3f}; null gap {null_gap:+.2f} (need < 1); "
           f"all 7 methods on seed {SEEDS[0]} in {secs:.0f}s (budget 600s)")


# -- 6 ------------------------------------------------------------------------------------

def test_criterion_6_feature_shapes():
    rng = np.random.default_rng(0)
    words = ["alpha", "beta", "gamma", "delta", "omega"]
    docs = [LabeledDocument(f"d{i}", f"u{i % 5}", "", LABELS[i % 3], list(rng.choice(words, 3)) + [LABELS[i % 3]])
            for i in range(45)]
    cfg = replace(full_config(), gru=replace(full_config().gru, epochs=1))
    profiles = AuthorProfileTable(200, {f"u{i}": rng.normal(size=200) for i in range(5)})
    ctx = FoldContext(docs[6:], docs[:6], profiles, cfg)
    v = len(ctx.ngram_vocab())
    widths = {name: ctx.features(spec, "train").width for name, spec in REGISTRY.items() if spec.classifier != "gru"}
    widths["HS"] = ctx.gru_model().hidden_units
    expected = {"LR": v, "HS": 128, "WS": 200, "AUTH": 200, "LR+AUTH": v + 200, "HS+AUTH": 328, "WS+AUTH": 400}
    counts = {"racism": 1939, "sexism": 3148, "none": 11115}
    count_docs = [LabeledDocument(f"{lab}{i}", "u", "", lab, []) for lab, n in counts.items() for i in range(n)]
    w = tuple(round(float(x), 2) for x in class_weights(count_docs))
    record(6, widths == expected and w == (0.12, 0.19, 0.69),
           f"widths {widths} (V = {v}); class weights for counts 1939/3148/11115: {w}")


# -- 7 ------------------------------------------------------------------------------------

def test_criterion_7_replication(tmp_path):
    docs, edges = os.environ.get("AUTHORPROF_DOCS"), os.environ.get("AUTHORPROF_EDGES")
    if not docs or not edges:
        RESULTS[7] = "criterion 7: SKIP  conditional; set AUTHORPROF_DOCS and AUTHORPROF_EDGES to re-hydrated data"
        pytest.skip(RESULTS[7])
    argv = ["replicate", "--docs", docs, "--edges", edges, "--methods", "LR,LR+AUTH", "--out", str(tmp_path)]
    if os.environ.get("AUTHORPROF_AUTHORS"):
        argv += ["--authors", os.environ["AUTHORPROF_AUTHORS"]]
    code = main(argv)
    check = (tmp_path / "reports" / "replicate_check.txt").read_text() if code == 0 else f"exit code {code}"
    ok = code == 0 and "FAIL" not in check
    RESULTS[7] = f"criterion 7: {'PASS' if ok else 'FAIL'}  " + " | ".join(
        line.strip() for line in check.splitlines() if line.strip())
    print(RESULTS[7])
    if not ok:
        pytest.xfail("best-effort replication missed (does not fail the build)")


# -- 8 ------------------------------------------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    spec = SyntheticSpec(block_sizes=(20, 20, 40, 40), p_intra=0.2, p_inter=0.01, n_documents=400, seed=7)
    generate_synthetic(spec).write(tmp_path / "data")
    (tmp_path / "c.cfg").write_text("preset = desk\nwalk.dims = 16\nwalk.epochs = 2\ngru.epochs = 3\n"
                                    "gbdt.rounds = 20\nexperiment.folds = 3\nexperiment.embedding_dims = 8\n")
    d = tmp_path / "data"
    reports = []
    for run in ("a", "b"):
        code = main(["evaluate", "--docs", str(d / "docs.tsv"), "--edges", str(d / "edges.tsv"),
                     "--authors", str(d / "authors.txt"), "--config", str(tmp_path / "c.cfg"),
                     "--deterministic", "--seed", "7", "--out", str(tmp_path / run)])
        assert code == 0
        reports.append(b"".join((tmp_path / run / "reports" / n).read_bytes() for n in ("report.txt", "report.jsonl")))
    identical = reports[0] == reports[1]

    rng = np.random.default_rng(8)
    trips = {}
    lr = LrModel(rng.normal(size=(3, 7)), rng.normal(size=3))
    lr.save(tmp_path / "m.lr")
    back = LrModel.load(tmp_path / "m.lr")
    trips["lr"] = back.weights.tobytes() == lr.weights.tobytes() and back.bias.tobytes() == lr.bias.tobytes()
    X = rng.normal(size=(60, 4))
    y = rng.integers(0, 3, 60)
    gb = gbdt_fit(X, y, GbdtConfig(rounds=5, min_samples_leaf=3), 3)
    gb.save(tmp_path / "m.gbdt")
    gb2 = GbdtModel.load(tmp_path / "m.gbdt")
    trips["gbdt"] = gb2.dumps() == gb.dumps() and gbdt_predict(gb2, X).tobytes() == gbdt_predict(gb, X).tobytes()
    table = WordEmbeddingTable(tuple("abc"), rng.normal(size=(4, 5)), np.array([True, False, True, False]))
    gru = init_model(table, GruConfig(hidden_units=4))
    gru.save(tmp_path / "m.npz")
    gru2 = GruModel.load(tmp_path / "m.npz")
    trips["gru"] = gru2.config == gru.config and all(
        gru2.params[k].tobytes() == v.tobytes() for k, v in gru.params.items())
    prof = AuthorProfileTable.load(tmp_path / "a" / "profiles" / "profiles.txt")
    prof.save(tmp_path / "p2.txt")
    trips["profiles"] = (tmp_path / "p2.txt").read_bytes() == (tmp_path / "a" / "profiles" / "profiles.txt").read_bytes()
    record(8, identical and all(trips.values()),
           f"evaluate --deterministic --seed 7 twice: {'byte-identical' if identical else 'DIFFERENT'} reports; "
           f"round-trips {trips}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
