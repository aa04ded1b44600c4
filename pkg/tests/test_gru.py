from dataclasses import replace

import numpy as np
import pytest

from authorprof.errors import ConfigError, DegenerateSplitError
from authorprof.gru import (GruConfig, GruModel, _mean_loss, encode_batch, extract_hidden_features,
                            extract_tuned_embeddings, forward, gru_forward, gru_train, init_model,
                            loss_and_grads, stratified_holdout)
from authorprof.text import WordEmbeddingTable, build_vocabulary, load_pretrained


def _tiny(hidden=3, dims=4, layers=2, dropout=0.0, seed=1):
    rng = np.random.default_rng(0)
    toks = tuple("abcdef")
    table = WordEmbeddingTable(toks, rng.uniform(-0.5, 0.5, (7, dims)), np.zeros(7, dtype=bool))
    model = init_model(table, GruConfig(hidden_units=hidden, layers=layers, dropout_rate=dropout, seed=seed))
    for k, v in model.params.items():
        if k.startswith("b"):
            v[:] = rng.normal(0, 0.3, v.shape)
    return model


DOCS = [["a", "b", "c"], ["d"], ["e", "f", "a", "zz"], [], ["b", "b"]]
Y = np.array([0, 1, 2, 0, 1])


def _max_rel_error(model, rng_seed=None):
    ids, mask = encode_batch(model.table, DOCS)

    def loss():
        rng = None if rng_seed is None else np.random.default_rng(rng_seed)
        return loss_and_grads(model, ids, mask, Y, rng)[0]

    _, grads = loss_and_grads(model, ids, mask, Y, None if rng_seed is None else np.random.default_rng(rng_seed))
    worst = {}
    h = 1e-5
    for name, p in model.params.items():
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            keep = p[idx]
            p[idx] = keep + h
            up = loss()
            p[idx] = keep - h
            down = loss()
            p[idx] = keep
            num[idx] = (up - down) / (2 * h)
        denom = max(np.linalg.norm(num) + np.linalg.norm(grads[name]), 1e-12)
        worst[name] = np.linalg.norm(num - grads[name]) / denom
    return worst


def test_gradients_match_finite_differences():
    worst = _max_rel_error(_tiny())
    assert set(worst) == {"E", "W0", "U0", "b0", "W1", "U1", "b1", "Wo", "bo"}
    assert max(worst.values()) < 1e-4, worst


def test_gradients_with_dropout_mask():
    worst = _max_rel_error(_tiny(dropout=0.3), rng_seed=7)
    assert max(worst.values()) < 1e-4, worst


def test_zero_parameters_fixed_point():
    model = _tiny()
    for v in model.params.values():
        if v is not model.params["E"]:
            v[...] = 0.0
    states, h_n, probs = gru_forward(model, ["a", "b"])
    assert all(not np.any(s) for s in states) and not np.any(h_n)
    assert np.allclose(probs, 1 / 3)
    assert not np.any(extract_hidden_features(model, [_doc(0, ["a"]), _doc(1, [])]).values)


def test_scalar_recurrence_by_hand():
    table = WordEmbeddingTable(("x",), np.array([[0.7], [0.0]]), np.zeros(2, dtype=bool))
    model = init_model(table, GruConfig(hidden_units=1, layers=1, dropout_rate=0.0))
    wz, wr, wc, uz, ur, uc = 0.5, -0.3, 1.2, 0.8, 0.4, -0.6
    bz, br, bc = 0.1, 0.2, -0.1
    model.params["W0"][:] = [[wz, wr, wc]]
    model.params["U0"][:] = [[uz, ur, uc]]
    model.params["b0"][:] = [bz, br, bc]
    sig = lambda v: 1 / (1 + np.exp(-v))
    x, h = 0.7, 0.0
    for _ in range(2):
        z = sig(wz * x + uz * h + bz)
        r = sig(wr * x + ur * h + br)
        c = np.tanh(wc * x + uc * (r * h) + bc)
        h = z * h + (1 - z) * c
    states, h_n, _ = gru_forward(model, ["x", "x"])
    assert h_n[0] == pytest.approx(h, abs=1e-14)
    assert states[0][1, 0] == pytest.approx(h, abs=1e-14)


def test_probabilities_on_simplex():
    rng = np.random.default_rng(2)
    model = _tiny(hidden=5)
    for v in model.params.values():
        v[...] = rng.normal(0, 1, v.shape)
    for doc in DOCS:
        p = gru_forward(model, doc)[2]
        assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-9


def test_padding_does_not_change_states():
    model = _tiny()
    alone = gru_forward(model, ["a", "b"])[1]
    ids, mask = encode_batch(model.table, [["a", "b"], ["c", "d", "e", "f", "a"]])
    batched = forward(model, ids, mask)[1][0]
    assert np.allclose(alone, batched, atol=1e-15)


def test_empty_input_is_oov():
    model = _tiny()
    assert np.array_equal(gru_forward(model, [])[1], gru_forward(model, ["never-seen"])[1])


def test_dropout_identity_at_zero_and_inference():
    model = _tiny(dropout=0.0)
    ids, mask = encode_batch(model.table, DOCS)
    a = forward(model, ids, mask, np.random.default_rng(0))[2]
    b = forward(model, ids, mask)[2]
    assert np.array_equal(a, b)
    model.config = replace(model.config, dropout_rate=0.5)
    c = forward(model, ids, mask, np.random.default_rng(0))[2]
    assert not np.allclose(b, c)
    assert np.array_equal(forward(model, ids, mask)[2], b)


def _doc(i, tokens, label="none"):
    from authorprof.text import LabeledDocument
    return LabeledDocument(f"d{i}", "u", " ".join(tokens), label, list(tokens))


def _trained(toy_docs, **cfg):
    vocab = build_vocabulary(toy_docs)
    table = load_pretrained(None, vocab, dims=8, seed=0)
    model = init_model(table, GruConfig(hidden_units=8, batch_size=8, **cfg))
    return table, gru_train(model, toy_docs)


def test_training_reduces_loss(toy_docs):
    _, model = _trained(toy_docs, epochs=5, patience=10)
    losses = [e["train_loss"] for e in model.log if "train_loss" in e]
    assert len(losses) == 5 and losses[4] < losses[0]


def test_early_stopping_restores_best(toy_docs):
    _, model = _trained(toy_docs, epochs=12, patience=2)
    summary = model.log[-1]
    assert summary["best_val_loss"] == min(e["val_loss"] for e in model.log if "val_loss" in e)
    y = np.array([d.label_index for d in toy_docs])
    _, va = stratified_holdout(y, model.config.validation_fraction, model.config.seed)
    restored = _mean_loss(model, [toy_docs[i].tokens for i in va], y[va], 256)
    assert restored == pytest.approx(summary["best_val_loss"], abs=1e-12)


def test_stratified_holdout_sizes():
    y = np.repeat([0, 1, 2], [12, 19, 69])
    tr, va = stratified_holdout(y, 0.1, 0)
    assert (len(tr), len(va)) == (90, 10)
    assert np.bincount(y[va]).tolist() == [1, 2, 7]
    assert sorted(np.concatenate([tr, va]).tolist()) == list(range(100))


def test_tuned_embeddings(toy_docs):
    vocab = build_vocabulary(toy_docs)
    table = load_pretrained(None, vocab, dims=8, seed=0)
    model = init_model(table, GruConfig(hidden_units=8, epochs=3, batch_size=8))
    before = extract_tuned_embeddings(model)
    assert np.array_equal(before.matrix, table.matrix)
    gru_train(model, toy_docs)
    after = extract_tuned_embeddings(model)
    assert np.any(np.any(after.matrix != table.matrix, axis=1))
    assert after.oov_index == len(vocab) and after.lookup("unseen-token") == after.oov_index
    assert np.array_equal(table.matrix, before.matrix)


def test_hidden_features_shape_and_determinism(toy_docs):
    table = load_pretrained(None, build_vocabulary(toy_docs), dims=200, seed=0)
    model = init_model(table, GruConfig())
    fm = extract_hidden_features(model, toy_docs[:6])
    assert fm.shape == (6, 128) and fm.tags == ("hidden_state",)
    assert np.array_equal(fm.values, extract_hidden_features(model, toy_docs[:6]).values)


def test_errors(toy_docs):
    with pytest.raises(ConfigError):
        GruConfig(dropout_rate=1.0).validate()
    with pytest.raises(ConfigError):
        GruConfig(validation_fraction=0.5).validate()
    no_racism = [d for d in toy_docs if d.label != "racism"]
    table = load_pretrained(None, build_vocabulary(no_racism), dims=4)
    with pytest.raises(DegenerateSplitError):
        gru_train(init_model(table, GruConfig(hidden_units=2)), no_racism)


def test_training_deterministic(toy_docs):
    _, a = _trained(toy_docs, epochs=3)
    _, b = _trained(toy_docs, epochs=3)
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_checkpoint_round_trip(tmp_path, toy_docs):
    _, model = _trained(toy_docs, epochs=2)
    model.save(tmp_path / "m.npz")
    back = GruModel.load(tmp_path / "m.npz")
    assert back.config == model.config and back.table.tokens == model.table.tokens
    assert set(back.params) == set(model.params)
    for k in model.params:
        assert back.params[k].tobytes() == model.params[k].tobytes()
    assert np.array_equal(back.table.pretrained, model.table.pretrained)
