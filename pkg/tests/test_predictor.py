import math

import numpy as np
import pytest

from levelscope.lob_data import MovementLabel, split_dataset
from levelscope.masking import LevelMask, apply_mask, mask_from_levels, mask_matrix
from levelscope.predictor import (
    BackboneKind,
    TrainConfig,
    batch_loss_and_gradient,
    confusion_matrix,
    evaluate,
    f1_report,
    forward,
    init_params,
    load_params,
    loss_and_gradient,
    param_shapes,
    params_from_bytes,
    params_to_bytes,
    predict_proba,
    save_params,
    train,
)
from levelscope.predictor.models import PROB_FLOOR
from levelscope.synthgen import SynthConfig, generate
from oracles import bilinear_reference, conv_reference, f1_by_counting, numeric_gradient

KINDS = list(BackboneKind)


def _random_params(kind, T, seed):
    rng = np.random.default_rng(seed)
    p = init_params(kind, T, seed)
    return p.replace({k: v + 0.3 * rng.normal(size=v.shape) for k, v in p.weights.items()})


def test_bilinear_shapes_T10():
    shapes = param_shapes(BackboneKind.TEMPORAL_BILINEAR, 10)
    assert shapes["W1"] == (60, 40) and shapes["W"] == (10, 10) and shapes["W2"] == (10, 1)
    assert shapes["W_out"] == (3, 60) and shapes["b1"] == (60,) and shapes["b2"] == (3,)
    p = init_params("bilinear", 10, 0)
    assert {k: v.shape for k, v in p.weights.items()} == shapes


@pytest.mark.parametrize("kind", KINDS)
def test_init_is_deterministic_and_seeded(kind):
    a, b, c = init_params(kind, 6, 1), init_params(kind, 6, 1), init_params(kind, 6, 2)
    assert a.equals(b) and not a.equals(c)
    for name, w in a.weights.items():
        if name.startswith("b"):
            assert not w.any()


def test_init_respects_glorot_bound():
    p = init_params("bilinear", 10, 0)
    assert np.abs(p["W1"]).max() <= math.sqrt(6 / 100)
    assert p["lam_logit"][0] == 0.0  # attention mix starts at 0.5


@pytest.mark.parametrize("kind,ref", [("bilinear", bilinear_reference), ("conv", conv_reference)])
def test_forward_matches_reference(kind, ref):
    p = _random_params(kind, 7, 3)
    X = np.random.default_rng(0).normal(size=(4, 40, 7))
    P = predict_proba(p, X)
    for i in range(4):
        assert np.allclose(P[i], ref(p.weights, X[i]), rtol=0, atol=1e-12)
        assert abs(P[i].sum() - 1) < 1e-9


@pytest.mark.parametrize("kind", KINDS)
def test_zero_output_layer_gives_uniform(kind):
    p = init_params(kind, 5, 0)
    w = dict(p.weights)
    for name in w:
        if name in ("W_out", "b2", "b_out"):
            w[name] = np.zeros_like(w[name])
    out = forward(p.replace(w), np.random.default_rng(1).normal(size=(40, 5)))
    assert np.array_equal(out, np.full(3, 1 / 3))


@pytest.mark.parametrize("kind", KINDS)
def test_identity_mask_and_excluded_levels(kind):
    p = _random_params(kind, 5, 4)
    rng = np.random.default_rng(2)
    X = rng.normal(size=(40, 5))
    assert np.array_equal(forward(p, X), forward(p, apply_mask(X, mask_matrix(LevelMask.full(), 5))))
    M = mask_matrix(mask_from_levels({1, 4}), 5)
    Y = X.copy()
    Y[M == 0] += rng.normal(size=int((M == 0).sum()))
    assert np.array_equal(forward(p, apply_mask(X, M)), forward(p, apply_mask(Y, M)))


@pytest.mark.parametrize("kind", KINDS)
def test_forward_rejects_bad_input(kind):
    p = init_params(kind, 5, 0)
    X = np.zeros((40, 5))
    X[0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        forward(p, X)
    with pytest.raises(ValueError):
        forward(p, np.zeros((40, 4)))


def test_uniform_prediction_loss_is_ln3():
    p = init_params("conv", 5, 0)
    w = {k: np.zeros_like(v) for k, v in p.weights.items()}
    loss, _ = loss_and_gradient(p.replace(w), [(np.ones((40, 5)), MovementLabel.UP)] * 3)
    assert loss == pytest.approx(math.log(3), abs=1e-15)


def test_confident_prediction_loss_near_zero():
    p = init_params("conv", 5, 0)
    w = {k: np.zeros_like(v) for k, v in p.weights.items()}
    w["b_out"] = np.array([40.0, 0.0, 0.0])
    loss, _ = loss_and_gradient(p.replace(w), [(np.zeros((40, 5)), MovementLabel.UP)])
    assert loss < 1e-15
    w["b_out"] = np.array([-400.0, 0.0, 0.0])
    loss, g = loss_and_gradient(p.replace(w), [(np.zeros((40, 5)), MovementLabel.UP)])
    assert loss == pytest.approx(-math.log(PROB_FLOOR))
    assert all(np.isfinite(v).all() for v in g.values())


def test_empty_batch_rejected():
    with pytest.raises(ValueError):
        loss_and_gradient(init_params("conv", 5, 0), [])


@pytest.mark.parametrize("kind", KINDS)
def test_gradient_matches_finite_differences(kind):
    T = 5
    rng = np.random.default_rng(7)
    p = _random_params(kind, T, 5)
    X = rng.normal(size=(3, 40, T))
    y = np.array([0, 1, 2])
    _, g = batch_loss_and_gradient(p, X, y)
    weights = {k: np.array(v) for k, v in p.weights.items()}
    num = numeric_gradient(lambda w: batch_loss_and_gradient(p.replace(w), X, y)[0], weights)
    for name in g:
        err = np.abs(g[name] - num[name]).max() / max(1.0, np.abs(num[name]).max())
        assert err <= 1e-4, name


def test_f1_examples():
    y = np.array([0, 1, 2] * 10)
    assert f1_report(y, y).macro_f1 == 1.0
    r = f1_report(y, np.zeros(30, dtype=int))
    assert r.per_class_precision[0] == pytest.approx(1 / 3) and r.per_class_recall[0] == 1.0
    assert r.per_class_f1 == (0.5, 0.0, 0.0)
    assert r.macro_f1 == pytest.approx(1 / 6, abs=1e-15)
    assert r.confusion[:, 0].tolist() == [10, 10, 10]


def test_f1_invariant_under_relabeling():
    rng = np.random.default_rng(3)
    y, p = rng.integers(0, 3, 80), rng.integers(0, 3, 80)
    perm = np.array([2, 0, 1])
    assert f1_report(perm[y], perm[p]).macro_f1 == pytest.approx(f1_report(y, p).macro_f1, abs=1e-15)


def test_f1_matches_counting_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 201))
        y, p = rng.integers(0, 3, n), rng.integers(0, 3, n)
        macro, per_class = f1_by_counting(y, p)
        r = f1_report(y, p)
        assert r.macro_f1 == macro and list(r.per_class_f1) == per_class
        assert r.confusion.sum(axis=1).tolist() == np.bincount(y, minlength=3).tolist()


def test_confusion_and_empty_input():
    assert confusion_matrix([0, 1], [1, 1]).tolist() == [[0, 1, 0], [0, 1, 0], [0, 0, 0]]
    with pytest.raises(ValueError):
        f1_report([], [])


def test_evaluate_uses_argmax(small_dataset):
    p = init_params("bilinear", 10, 0)
    w = {k: np.zeros_like(v) for k, v in p.weights.items()}
    w["b2"] = np.array([0.0, 0.0, 1.0])
    r = evaluate(p.replace(w), small_dataset.test, LevelMask.full())
    labels = small_dataset.test.labels
    assert r.macro_f1 == f1_report(labels, np.full(len(labels), 2)).macro_f1
    with pytest.raises(ValueError):
        evaluate(p, [], LevelMask.full())


def test_params_container_round_trip(tmp_path):
    for kind in KINDS:
        p = _random_params(kind, 6, 9)
        blob = params_to_bytes(p)
        assert blob.startswith(b"LVLSCOPE1")
        assert params_from_bytes(blob).equals(p)
        save_params(p, tmp_path / f"{kind.value}.bin")
        assert load_params(tmp_path / f"{kind.value}.bin").equals(p)
    with pytest.raises(ValueError):
        params_from_bytes(b"NOTMAGIC" + blob[9:])


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(precision="float16")


FAST = TrainConfig(learning_rate=0.3, batch_size=64, max_epochs=3, steps_per_epoch=10, early_stop_patience=0)


def test_zero_epochs_returns_init(small_dataset):
    p, trace = train(small_dataset, LevelMask.full(), "conv", TrainConfig(max_epochs=0, seed=4))
    assert p.equals(init_params("conv", 10, 4)) and trace.epoch_loss == []


@pytest.mark.parametrize("kind", KINDS)
def test_training_is_deterministic(small_dataset, kind):
    a, ta = train(small_dataset, LevelMask.full(), kind, FAST)
    b, tb = train(small_dataset, LevelMask.full(), kind, FAST)
    assert a.equals(b) and ta.to_dict() == tb.to_dict()
    c, _ = train(small_dataset, LevelMask.full(), kind, FAST.with_seed(1))
    assert not a.equals(c)


def test_returned_params_are_best_epoch(small_dataset):
    p, trace = train(small_dataset, LevelMask.full(), "bilinear", FAST)
    assert trace.best_validation_f1 == max(trace.validation_f1)
    assert trace.best_epoch == trace.validation_f1.index(max(trace.validation_f1))
    assert evaluate(p, small_dataset.validation, LevelMask.full()).macro_f1 == trace.best_validation_f1


def test_early_stopping_limits_epochs(small_dataset):
    cfg = TrainConfig(learning_rate=1e-6, batch_size=64, max_epochs=30, steps_per_epoch=2, early_stop_patience=2)
    _, trace = train(small_dataset, LevelMask.full(), "conv", cfg)
    assert len(trace.epoch_loss) < 30


def test_empty_train_partition_rejected(small_dataset):
    import dataclasses

    empty = dataclasses.replace(small_dataset, train=small_dataset.train[:0])
    with pytest.raises(ValueError):
        train(empty, LevelMask.full(), "conv", FAST)


def test_separable_data_is_learned():
    events = generate(SynthConfig(days=4, events_per_day=700, signal_strength=1.0, seed=3))
    ds = split_dataset(events, 3, 1, 0.25, 10, 10, 0.002)
    assert len(ds.train) + len(ds.validation) >= 2000
    cfg = TrainConfig(learning_rate=0.3, batch_size=128, max_epochs=6, steps_per_epoch=20, early_stop_patience=0,
                      precision="float32")
    p, trace = train(ds, LevelMask.full(), "bilinear", cfg)
    init_loss, _ = batch_loss_and_gradient(init_params("bilinear", 10, 0), ds.train.matrices, ds.train.labels)
    final_loss, _ = batch_loss_and_gradient(p, ds.train.matrices, ds.train.labels)
    assert final_loss < init_loss
    assert trace.best_validation_f1 > 0.90


def test_float32_training_returns_float64(small_dataset):
    import dataclasses

    p, _ = train(small_dataset, LevelMask.full(), "conv", dataclasses.replace(FAST, precision="float32"))
    assert all(w.dtype == np.float64 for w in p.weights.values())


def test_evaluate_leaves_windows_untouched():
    from levelscope.lob_data import WindowSet
    from levelscope.predictor import evaluate, init_params

    X = np.ones((4, 40, 1))
    ws = WindowSet(X, np.array([0, 1, 2, 0]), np.zeros(4, dtype=np.int64), np.arange(4))
    evaluate(init_params("conv", 1, 0), ws, LevelMask.from_string("1000000000"))
    assert np.all(X == 1.0)
