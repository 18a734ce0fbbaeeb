"""Level selection on a small synthetic book, start to finish.

Run with ``python3 demos/selection_walkthrough.py``; takes well under a minute.
"""
import numpy as np

from levelscope.lob_data import split_dataset
from levelscope.masking import LevelMask, apply_mask, mask_matrix
from levelscope.predictor import TrainConfig
from levelscope.selection import BpsoConfig, TrainingEvaluator, backward_eliminate, bpso_select
from levelscope.synthgen import SynthConfig, generate

# a book where only level 2 carries information about the next mid-price move
events = generate(SynthConfig(days=4, events_per_day=600, informative_levels={2}, signal_strength=0.9, seed=3))
print(len(events), "events over", events[-1].day_index + 1, "days")

ds = split_dataset(events, train_days=3, test_days=1, validation_fraction=0.25, T=10, H=10, alpha=0.002)
print("windows train/val/test:", len(ds.train), len(ds.validation), len(ds.test))
print("input shape:", ds.train.matrices.shape)

# masks zero whole levels, i.e. blocks of 4 rows
s = LevelMask.from_string("0100000000")
M = mask_matrix(s, 10)
print(M[:12, 0])  # rows 5..8 stay on
X = apply_mask(ds.train.matrices[0], M)
print("nonzero rows:", np.flatnonzero(np.abs(X).sum(axis=1)))

cfg = TrainConfig(learning_rate=0.3, batch_size=64, max_epochs=4, steps_per_epoch=10,
                  early_stop_patience=0, precision="float32", seed=7)
ev = TrainingEvaluator(ds, "conv", cfg)

trace = backward_eliminate(ev)
print("BE removal order:", trace.removal_order)
print("BE last level standing:", trace.final_level)

res = bpso_select(ev, BpsoConfig(swarm_size=6, iterations=4, seed=7))
print("BPSO best:", res.best, "levels", res.best.levels, "fitness", round(res.best_fitness, 4))
for mask, fit in res.ranked:
    print("  ", mask, round(fit, 4))
print("distinct trainings:", ev.trainings)

full = ev.test_report(LevelMask.full())
single = ev.test_report(trace.per_cardinality[1][0])
print(f"test macro-F1, all levels {full.macro_f1:.3f}, best single level {single.macro_f1:.3f}")
