from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .models import N_CLASSES


@dataclass(frozen=True)
class F1Report:
    """Per-class precision/recall/F1 (class order Up, Down, Stationary).

    ``confusion[i, j]`` counts windows of true class i predicted as j.
    Every ratio is computed exactly with rationals and rounded once to float.
    """

    per_class_precision: tuple[float, float, float]
    per_class_recall: tuple[float, float, float]
    per_class_f1: tuple[float, float, float]
    macro_f1: float
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "per_class_precision": list(self.per_class_precision),
            "per_class_recall": list(self.per_class_recall),
            "per_class_f1": list(self.per_class_f1),
            "macro_f1": self.macro_f1,
            "confusion": self.confusion.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> F1Report:
        return cls(
            tuple(d["per_class_precision"]),
            tuple(d["per_class_recall"]),
            tuple(d["per_class_f1"]),
            float(d["macro_f1"]),
            np.asarray(d["confusion"], dtype=np.int64),
        )


def confusion_matrix(y_true, y_pred, n_classes: int = N_CLASSES) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("label and prediction arrays differ in length")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


def f1_report(y_true, y_pred) -> F1Report:
    """Macro-averaged F1 with the 0/0 -> 0 convention."""
    cm = confusion_matrix(y_true, y_pred)
    if cm.sum() == 0:
        raise ValueError("cannot score an empty set")
    prec, rec, f1 = [], [], []
    for c in range(N_CLASSES):
        tp = int(cm[c, c])
        p = _ratio(tp, int(cm[:, c].sum()))
        r = _ratio(tp, int(cm[c, :].sum()))
        prec.append(p)
        rec.append(r)
        f1.append(2 * p * r / (p + r) if p + r else Fraction(0))
    macro = sum(f1, Fraction(0)) / N_CLASSES
    return F1Report(
        tuple(float(v) for v in prec),
        tuple(float(v) for v in rec),
        tuple(float(v) for v in f1),
        float(macro),
        cm,
    )


def macro_f1(y_true, y_pred) -> float:
    return f1_report(y_true, y_pred).macro_f1
