import numpy as np
import pytest

from levelscope.lob_data import split_dataset, validate_events
from levelscope.masking import LevelMask, mask_from_levels
from levelscope.predictor import TrainConfig, evaluate, f1_report, predict_proba, train
from levelscope.synthgen import SynthConfig, generate, latent_state

FAST = TrainConfig(learning_rate=0.3, batch_size=128, max_epochs=4, steps_per_epoch=20, early_stop_patience=0,
                   precision="float32")


def test_config_validation():
    for bad in [dict(days=0), dict(informative_levels={11}), dict(signal_strength=1.5), dict(tick=0),
                dict(level_weights=(1,) * 9), dict(lead=0), dict(move_size=1.0), dict(start_date="22/09/2015")]:
        with pytest.raises(ValueError):
            SynthConfig(**bad)


def test_deterministic():
    cfg = SynthConfig(days=2, events_per_day=200, seed=5)
    assert generate(cfg) == generate(cfg)
    assert generate(cfg) != generate(SynthConfig(days=2, events_per_day=200, seed=6))


def test_invariants_hold_exhaustively():
    rng = np.random.default_rng(0)
    for _ in range(10):
        cfg = SynthConfig(
            days=int(rng.integers(1, 4)),
            events_per_day=int(rng.integers(50, 400)),
            informative_levels=set(rng.choice(np.arange(1, 11), int(rng.integers(1, 4)), replace=False).tolist()),
            signal_strength=float(rng.random()),
            seed=int(rng.integers(1 << 30)),
        )
        events = generate(cfg)
        assert validate_events(events) == []
        assert len(events) == cfg.days * cfg.events_per_day


def test_days_are_business_days_with_increasing_times():
    events = generate(SynthConfig(days=6, events_per_day=30, start_date="2015-09-25"))
    dates = sorted({e.date for e in events})
    assert dates[0] == "2015-09-25" and dates[1] == "2015-09-28"
    assert [e.day_index for e in events[::30]] == list(range(6))


def test_latent_state_by_hand():
    starts = np.zeros(8, bool)
    starts[[1, 3]] = True
    dirs = np.array([1, 1, 1, -1, 1, 1, 1, 1])
    # up at 1 (weights 1,2,3 on 1..3), down at 3 (weights 1,2,3 on 3..5)
    assert latent_state(starts, dirs, 3).tolist() == [0, 1, 1, 1, -1, -1, 0, 0]


def test_state_persists():
    rng = np.random.default_rng(1)
    state = latent_state(rng.random(20000) < 0.1, np.where(rng.random(20000) < 0.5, 1, -1), 10)
    changes = np.count_nonzero(np.diff(state))
    assert 20000 / changes > 4


def _data(strength, levels=frozenset({1}), seed=0, days=4, per_day=700):
    cfg = SynthConfig(days=days, events_per_day=per_day, informative_levels=levels, signal_strength=strength, seed=seed)
    return split_dataset(generate(cfg), days - 1, 1, 0.25, 10, 10, 0.002)


def _independent_chance(labels, preds):
    p = np.bincount(labels, minlength=3) / len(labels)
    q = np.bincount(preds, minlength=3) / len(preds)
    return float(np.mean([2 * a * b / (a + b) if a + b else 0.0 for a, b in zip(p, q)]))


@pytest.mark.parametrize("kind", ["bilinear", "conv"])
def test_null_signal_is_not_learnable(kind):
    ds = _data(0.0, seed=2)
    params, trace = train(ds, LevelMask.full(), kind, FAST)
    y = ds.test.labels
    pred = predict_proba(params, ds.test.matrices).argmax(axis=1)
    majority_acc = np.bincount(y, minlength=3).max() / len(y)
    assert float(np.mean(pred == y)) <= majority_acc + 0.05
    assert abs(f1_report(y, pred).macro_f1 - _independent_chance(y, pred)) <= 0.05


def test_level_one_beats_level_five():
    ds = _data(0.9, days=10, per_day=2000)
    cfg = TrainConfig(learning_rate=0.3, batch_size=128, max_epochs=3, steps_per_epoch=20, early_stop_patience=0,
                      precision="float32")
    f = {}
    for k in (1, 5):
        s = mask_from_levels({k})
        p, _ = train(ds, s, "bilinear", cfg)
        f[k] = evaluate(p, ds.validation, s).macro_f1
    assert f[1] - f[5] >= 0.15


def test_more_signal_does_not_hurt():
    means = []
    for strength in (0.0, 0.9):
        scores = [train(_data(strength, seed=s, per_day=400), LevelMask.full(), "conv", FAST)[1].best_validation_f1
                  for s in range(5)]
        means.append(np.mean(scores))
    assert means[1] >= means[0]
