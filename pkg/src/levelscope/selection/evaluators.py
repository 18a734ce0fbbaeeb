"""Fitness evaluators: anything mapping a LevelMask to a score in [0, 1]."""
from __future__ import annotations

from collections.abc import Callable, Iterable
from typing import Protocol

from ..lob_data import Dataset
from ..masking import LevelMask
from ..predictor import BackboneKind, F1Report, ModelParams, TrainConfig, TrainTrace, evaluate, train


class FitnessEvaluator(Protocol):
    def __call__(self, mask: LevelMask) -> float: ...


class SelectionError(RuntimeError):
    """A fitness evaluation failed; ``mask`` is the offending mask."""

    def __init__(self, mask: LevelMask, cause: BaseException, partial=None):
        super().__init__(f"fitness evaluation failed for mask {mask}: {cause!r}")
        self.mask = mask
        self.partial = partial


def _guarded(evaluator: FitnessEvaluator, mask: LevelMask) -> float:
    try:
        return float(evaluator(mask))
    except SelectionError:
        raise
    except Exception as exc:
        raise SelectionError(mask, exc) from exc


def evaluate_all(evaluator: FitnessEvaluator, masks: Iterable[LevelMask], map_fn: Callable = map) -> list[float]:
    """Score independent masks, possibly concurrently via ``map_fn``.

    Results come back in input order whatever order ``map_fn`` runs them in.
    """
    masks = list(masks)
    return list(map_fn(_guarded, [evaluator] * len(masks), masks))


class Memoized:
    """Caches evaluator results per mask; ``calls`` counts distinct evaluations."""

    def __init__(self, evaluator: FitnessEvaluator):
        self.evaluator = evaluator
        self.cache: dict[LevelMask, float] = {}

    @property
    def calls(self) -> int:
        return len(self.cache)

    def __call__(self, mask: LevelMask) -> float:
        if mask not in self.cache:
            self.cache[mask] = float(self.evaluator(mask))
        return self.cache[mask]


class TrainingEvaluator:
    """Production fitness: train a backbone on the masked data, score validation.

    The same ``config`` (seed included) is used for every mask, so the value
    for a given mask is reproducible, and it is cached.  The fitness is the
    best validation macro-F1 seen during training.
    """

    def __init__(self, dataset: Dataset, kind: BackboneKind | str, config: TrainConfig):
        self.dataset = dataset
        self.kind = BackboneKind.parse(kind)
        self.config = config
        self._fits: dict[LevelMask, tuple[float, ModelParams, TrainTrace]] = {}

    @property
    def trainings(self) -> int:
        return len(self._fits)

    def fit(self, mask: LevelMask) -> tuple[float, ModelParams, TrainTrace]:
        if mask not in self._fits:
            params, trace = train(self.dataset, mask, self.kind, self.config)
            if trace.best_epoch < 0:
                # no epochs run: score the untrained model
                fitness = evaluate(params, self._scoring_set(), mask).macro_f1
            else:
                fitness = trace.best_validation_f1
            self._fits[mask] = (float(fitness), params, trace)
        return self._fits[mask]

    def _scoring_set(self):
        return self.dataset.validation if len(self.dataset.validation) else self.dataset.train

    def __call__(self, mask: LevelMask) -> float:
        return self.fit(mask)[0]

    def model(self, mask: LevelMask) -> ModelParams:
        return self.fit(mask)[1]

    def test_report(self, mask: LevelMask) -> F1Report:
        return evaluate(self.model(mask), self.dataset.test, mask)


__all__ = ["FitnessEvaluator", "Memoized", "SelectionError", "TrainingEvaluator", "evaluate_all"]
