"""Three-class movement classifiers, their trainer and F1 scoring."""
from .metrics import F1Report, confusion_matrix, f1_report, macro_f1
from .models import (
    BackboneKind,
    ModelParams,
    batch_loss_and_gradient,
    forward,
    init_params,
    load_params,
    loss_and_gradient,
    param_shapes,
    params_from_bytes,
    params_to_bytes,
    predict_proba,
    save_params,
)
from .training import TrainConfig, TrainTrace, evaluate, train

__all__ = [
    "BackboneKind",
    "F1Report",
    "ModelParams",
    "TrainConfig",
    "TrainTrace",
    "batch_loss_and_gradient",
    "confusion_matrix",
    "evaluate",
    "f1_report",
    "forward",
    "init_params",
    "load_params",
    "loss_and_gradient",
    "macro_f1",
    "param_shapes",
    "params_from_bytes",
    "params_to_bytes",
    "predict_proba",
    "save_params",
    "train",
]
