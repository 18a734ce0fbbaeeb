"""Level selection by backward elimination and binary particle swarm."""
from .elimination import EliminationRound, EliminationTrace, backward_eliminate
from .evaluators import FitnessEvaluator, Memoized, SelectionError, TrainingEvaluator, evaluate_all
from .swarm import (
    BpsoConfig,
    BpsoResult,
    IterationRecord,
    Particle,
    SwarmState,
    bpso_select,
    position_update,
    velocity_update,
)
from .traces import read_trace, trace_document, write_trace

__all__ = [
    "BpsoConfig",
    "BpsoResult",
    "EliminationRound",
    "EliminationTrace",
    "FitnessEvaluator",
    "IterationRecord",
    "Memoized",
    "Particle",
    "SelectionError",
    "SwarmState",
    "TrainingEvaluator",
    "backward_eliminate",
    "bpso_select",
    "evaluate_all",
    "position_update",
    "read_trace",
    "trace_document",
    "velocity_update",
    "write_trace",
]
