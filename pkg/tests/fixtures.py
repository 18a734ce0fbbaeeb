"""Hand-built run records, including consensus columns transcribed from published tables."""
from __future__ import annotations

import numpy as np

from levelscope.masking import LevelMask, mask_from_levels
from levelscope.predictor import f1_report
from levelscope.reporting import Method, RunRecord
from oracles import pairs_from_column, sets_from_column

# columns in the order US/conv H10,20,50, US/bilinear H10,20,50, Nordic/conv ..., Nordic/bilinear ...
COLUMNS = [(d, b, h) for d in ("us", "nordic") for b in ("conv", "bilinear") for h in (10, 20, 50)]

# percentages per level (rows level 1..10), one list per column
TWO_LEVEL_TABLE = [
    [100, 100, 100, 100, 100, 100, 100, 100, 100, 80, 100, 100],
    [10, 20, 15, 15, 35, 25, 5, 10, 30, 35, 55, 50],
    [0, 20, 25, 20, 20, 15, 5, 5, 10, 10, 5, 20],
    [10, 0, 5, 5, 20, 25, 15, 10, 5, 20, 5, 10],
    [10, 5, 10, 0, 0, 0, 10, 5, 20, 10, 0, 5],
    [5, 15, 5, 20, 10, 15, 5, 15, 5, 10, 5, 10],
    [15, 10, 20, 15, 5, 5, 25, 20, 5, 15, 5, 0],
    [20, 15, 5, 5, 5, 0, 15, 10, 20, 10, 15, 0],
    [25, 15, 0, 15, 0, 0, 10, 20, 0, 5, 5, 0],
    [5, 0, 15, 5, 5, 15, 10, 5, 5, 5, 5, 5],
]
TWO_LEVEL_AVERAGE = ["98.33", "25.42", "12.92", "10.83", "6.25", "10.00", "11.67", "10.00", "7.92", "6.67"]

SWARM_FINAL_TABLE = [
    [100, 100, 60, 100, 100, 80, 60, 50, 50, 50, 90, 70],
    [20, 10, 30, 0, 10, 10, 30, 20, 20, 20, 10, 20],
    [0, 10, 10, 10, 0, 20, 10, 30, 10, 30, 0, 0],
    [0, 0, 0, 0, 10, 0, 0, 0, 10, 0, 0, 0],
    [0, 0, 0, 10, 10, 0, 0, 10, 10, 0, 10, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 10],
    [0, 0, 0, 10, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 10, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 10, 0, 20, 0, 0, 0, 0, 0, 0, 0, 0],
    [10, 0, 10, 0, 0, 0, 0, 0, 0, 0, 0, 0],
]
SWARM_FINAL_AVERAGE = ["75.83", "16.67", "10.83", "1.67", "4.17", "0.83", "0.83", "0.83", "2.50", "1.67"]

RUNS = 20


def dummy_report(seed=0, n=30):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    return f1_report(y, np.where(rng.random(n) < 0.6, y, rng.integers(0, 3, n)))


def be_record(config, rep, pair, first=None, report=None):
    """BE record whose two-level subset is ``pair`` (chain padded with the other levels)."""
    dataset, backbone, horizon = config
    first = first if first is not None else min(pair)
    chain = [first, *[k for k in pair if k != first]]
    chain += [k for k in range(1, 11) if k not in chain]
    selected = tuple((mask_from_levels(chain[:n]), 0.5) for n in range(10, 0, -1))
    return RunRecord(dataset, backbone, Method.BE, horizon, rep, rep, selected, selected[-1][0],
                     report or dummy_report(rep))


def bpso_record(config, rep, levels, report=None):
    dataset, backbone, horizon = config
    mask = mask_from_levels(levels)
    return RunRecord(dataset, backbone, Method.BPSO, horizon, rep, rep, ((mask, 0.5),), mask,
                     report or dummy_report(rep))


def column_counts(table, c):
    return {k + 1: table[k][c] * RUNS // 100 for k in range(10)}


def two_level_records():
    out = []
    for c, cfg in enumerate(COLUMNS):
        for rep, pair in enumerate(pairs_from_column(column_counts(TWO_LEVEL_TABLE, c), RUNS)):
            out.append(be_record(cfg, rep, pair))
    return out


def swarm_final_records():
    out = []
    for c, cfg in enumerate(COLUMNS):
        for rep, levels in enumerate(sets_from_column(column_counts(SWARM_FINAL_TABLE, c), RUNS)):
            out.append(bpso_record(cfg, rep, levels))
    return out


FULL = LevelMask.full()
