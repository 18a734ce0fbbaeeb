from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..lob_data import Dataset, as_window_set
from ..masking import LevelMask, mask_matrix
from .metrics import F1Report, f1_report
from .models import BackboneKind, ModelParams, init_params, raw_logits, raw_loss_and_gradient, to_time_major

EVAL_CHUNK = 4096


@dataclass(frozen=True)
class TrainConfig:
    """Plain mini-batch gradient descent settings.

    ``early_stop_patience`` is the number of consecutive epochs without a
    validation macro-F1 improvement tolerated before stopping; 0 disables
    early stopping.  ``steps_per_epoch`` caps the mini-batches drawn per
    epoch (None: one full pass).  ``precision`` selects the float type used
    while fitting; returned parameters are always float64.
    """

    learning_rate: float = 0.01
    batch_size: int = 64
    max_epochs: int = 50
    early_stop_patience: int = 5
    seed: int = 0
    steps_per_epoch: int | None = None
    precision: str = "float64"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be non-negative")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise ValueError("steps_per_epoch must be positive")
        if self.precision not in ("float64", "float32"):
            raise ValueError("precision must be 'float64' or 'float32'")

    def with_seed(self, seed: int) -> TrainConfig:
        return dataclasses.replace(self, seed=seed)


@dataclass
class TrainTrace:
    epoch_loss: list[float] = field(default_factory=list)
    validation_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_validation_f1: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "epoch_loss": list(self.epoch_loss),
            "validation_f1": list(self.validation_f1),
            "best_epoch": self.best_epoch,
            "best_validation_f1": self.best_validation_f1,
        }


def _masked_time_major(matrices: np.ndarray, s: LevelMask, dtype=np.float64) -> np.ndarray:
    """Masked windows in the (T, N, 40) layout the backbones run on."""
    # out of place: to_time_major may hand back a view of the caller's data
    return to_time_major(matrices).astype(dtype, copy=False) * mask_matrix(s, 1)[:, 0].astype(dtype)


def _predict_labels(kind: BackboneKind, weights, Z: np.ndarray) -> np.ndarray:
    n = Z.shape[1]
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, EVAL_CHUNK):
        out[start : start + EVAL_CHUNK] = raw_logits(kind, weights, Z[:, start : start + EVAL_CHUNK]).argmax(axis=1)
    return out


def evaluate(params: ModelParams, windows, s: LevelMask) -> F1Report:
    """Macro-F1 report of argmax predictions on the masked windows."""
    ws = as_window_set(windows, params.T)
    if len(ws) == 0:
        raise ValueError("cannot evaluate on an empty window list")
    if not np.all(np.isfinite(ws.matrices)):
        raise FloatingPointError("non-finite value in evaluation windows")
    return f1_report(ws.labels, _predict_labels(params.kind, params.weights, _masked_time_major(ws.matrices, s)))


def train(dataset: Dataset, s: LevelMask, kind: BackboneKind, config: TrainConfig):
    """Fit a backbone on masked training windows; returns ``(params, trace)``.

    The returned params are the epoch snapshot with the best validation
    macro-F1 (first best on ties).  With an empty validation partition the
    training partition is scored instead.
    """
    kind = BackboneKind(kind)
    if len(dataset.train) == 0:
        raise ValueError("training partition is empty")
    T = dataset.window_length
    params = init_params(kind, T, config.seed)
    trace = TrainTrace()
    if config.max_epochs == 0:
        return params, trace

    dtype = np.dtype(config.precision)
    Z = _masked_time_major(dataset.train.matrices, s, dtype)
    y = dataset.train.labels
    val = dataset.validation if len(dataset.validation) else dataset.train
    Zv = _masked_time_major(val.matrices, s, dtype)
    yv = val.labels

    rng = np.random.default_rng([config.seed, 0x5EED])
    weights = {k: v.astype(dtype) for k, v in params.weights.items()}
    lr = dtype.type(config.learning_rate)
    best = params
    since_best = 0
    n = len(y)
    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        starts = range(0, n, config.batch_size)
        if config.steps_per_epoch is not None:
            starts = starts[: config.steps_per_epoch]
        total, seen = 0.0, 0
        for start in starts:
            idx = order[start : start + config.batch_size]
            loss, grads = raw_loss_and_gradient(kind, weights, Z[:, idx], y[idx])
            total += loss * len(idx)
            seen += len(idx)
            for name, g in grads.items():
                weights[name] -= lr * g
        f1 = f1_report(yv, _predict_labels(kind, weights, Zv)).macro_f1
        trace.epoch_loss.append(total / seen)
        trace.validation_f1.append(f1)
        if trace.best_epoch < 0 or f1 > trace.best_validation_f1:
            trace.best_epoch = epoch
            trace.best_validation_f1 = f1
            best = ModelParams(kind, T, config.seed, weights)
            since_best = 0
        else:
            since_best += 1
            if config.early_stop_patience and since_best >= config.early_stop_patience:
                break
    return best, trace
