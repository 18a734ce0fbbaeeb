"""Backward elimination over book levels."""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

from ..lob_data import N_LEVELS
from ..masking import LevelMask, mask_from_levels
from .evaluators import FitnessEvaluator, SelectionError, evaluate_all


@dataclass(frozen=True)
class EliminationRound:
    remaining: tuple[int, ...]
    candidate_fitness: dict[int, float]
    removed: int
    fitness_after: float

    def to_dict(self) -> dict:
        return {
            "remaining": list(self.remaining),
            "candidate_fitness": {str(k): v for k, v in self.candidate_fitness.items()},
            "removed": self.removed,
            "fitness_after": self.fitness_after,
        }


@dataclass
class EliminationTrace:
    full_fitness: float = float("nan")
    rounds: list[EliminationRound] = field(default_factory=list)
    # cardinality -> (mask, fitness); 10 is the full book
    per_cardinality: dict[int, tuple[LevelMask, float]] = field(default_factory=dict)

    @property
    def final_level(self) -> int | None:
        if not self.rounds or len(self.rounds[-1].remaining) != 2:
            return None
        last = self.rounds[-1]
        (level,) = set(last.remaining) - {last.removed}
        return level

    @property
    def removal_order(self) -> list[int]:
        return [r.removed for r in self.rounds]

    def to_dict(self) -> dict:
        return {
            "full_fitness": self.full_fitness,
            "rounds": [r.to_dict() for r in self.rounds],
            "final_level": self.final_level,
            "per_cardinality": {
                str(n): [str(m), f] for n, (m, f) in sorted(self.per_cardinality.items(), reverse=True)
            },
        }


def backward_eliminate(
    evaluator: FitnessEvaluator,
    tie_break: str = "higher",
    stop_below: float | None = None,
    map_fn: Callable = map,
) -> EliminationTrace:
    """Drop one level per round until a single level is left.

    Each round scores every mask that omits one of the remaining levels and
    removes the level whose omission scores highest.  Ties go to the higher
    level number (``tie_break="lower"`` flips that).  With ``stop_below``
    the run also stops once the best candidate falls under that fitness.
    On an evaluator failure a SelectionError is raised whose ``partial``
    attribute holds the trace so far.
    """
    if tie_break not in ("higher", "lower"):
        raise ValueError("tie_break must be 'higher' or 'lower'")
    trace = EliminationTrace()
    remaining = list(range(1, N_LEVELS + 1))
    try:
        trace.full_fitness = evaluate_all(evaluator, [LevelMask.full()], map_fn)[0]
        trace.per_cardinality[N_LEVELS] = (LevelMask.full(), trace.full_fitness)
        while len(remaining) > 1:
            candidates = [mask_from_levels(l for l in remaining if l != k) for k in remaining]
            scores = dict(zip(remaining, evaluate_all(evaluator, candidates, map_fn)))
            order = sorted(remaining, reverse=(tie_break == "higher"))
            removed = max(order, key=lambda k: scores[k])  # first max wins
            best = scores[removed]
            if stop_below is not None and best < stop_below:
                break
            trace.rounds.append(EliminationRound(tuple(remaining), scores, removed, best))
            remaining.remove(removed)
            trace.per_cardinality[len(remaining)] = (mask_from_levels(remaining), best)
    except SelectionError as exc:
        exc.partial = trace
        raise
    return trace


__all__ = ["EliminationRound", "EliminationTrace", "backward_eliminate"]
