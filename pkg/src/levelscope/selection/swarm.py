"""Binary particle swarm search over the 1024 level masks."""
from __future__ import annotations

import dataclasses
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from ..lob_data import N_LEVELS
from ..masking import LevelMask
from .evaluators import FitnessEvaluator, SelectionError, evaluate_all


@dataclass(frozen=True)
class BpsoConfig:
    swarm_size: int = 10
    iterations: int = 30
    c1: float = 2.0
    c2: float = 2.0
    v_max: float = 6.0
    w_start: float = 0.9
    w_end: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ValueError("swarm_size must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")
        if self.w_start < self.w_end:
            raise ValueError("w_start must be >= w_end")

    def with_seed(self, seed: int) -> BpsoConfig:
        return dataclasses.replace(self, seed=seed)

    def inertia(self, iteration: int) -> float:
        """Inertia for iteration 1..iterations, linear from w_start to w_end."""
        if self.iterations <= 1:
            return self.w_start
        frac = (iteration - 1) / (self.iterations - 1)
        return self.w_start - (self.w_start - self.w_end) * frac


@dataclass(frozen=True, eq=False)
class Particle:
    position: LevelMask
    velocity: np.ndarray
    personal_best: LevelMask
    personal_best_fitness: float


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    inertia: float
    positions: tuple[LevelMask, ...]
    fitness: tuple[float, ...]
    global_best: LevelMask
    global_best_fitness: float
    top: tuple[tuple[LevelMask, float], ...]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "inertia": self.inertia,
            "positions": [str(m) for m in self.positions],
            "fitness": list(self.fitness),
            "global_best": str(self.global_best),
            "global_best_fitness": self.global_best_fitness,
            "top": [[str(m), f] for m, f in self.top],
        }


@dataclass(frozen=True, eq=False)
class SwarmState:
    particles: tuple[Particle, ...]
    global_best: LevelMask
    global_best_fitness: float
    iteration: int
    inertia: float
    history: tuple[IterationRecord, ...] = field(default=())


@dataclass(frozen=True, eq=False)
class BpsoResult:
    best: LevelMask
    best_fitness: float
    ranked: tuple[tuple[LevelMask, float], ...]
    history: tuple[IterationRecord, ...]
    state: SwarmState

    def __iter__(self):
        # allows ``best, history = bpso_select(...)``
        return iter((self.best, self.history))


def velocity_update(
    p: Particle, s_global: LevelMask, w: float, c1: float, c2: float, r1: float, r2: float, v_max: float
) -> np.ndarray:
    s = p.position.as_array()
    v = w * np.asarray(p.velocity, dtype=np.float64)
    v = v + c1 * r1 * (p.personal_best.as_array() - s) + c2 * r2 * (s_global.as_array() - s)
    return np.clip(v, -v_max, v_max)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def position_update(p: Particle | None, v_new, r3) -> LevelMask:
    """Bit j is 1 exactly when r3[j] < sigmoid(v_new[j])."""
    v_new = np.asarray(v_new, dtype=np.float64).reshape(N_LEVELS)
    r3 = np.asarray(r3, dtype=np.float64).reshape(N_LEVELS)
    return LevelMask.from_array((r3 < _sigmoid(v_new)).astype(int))


def _ranked(seen: dict[LevelMask, float], n: int = 3) -> tuple[tuple[LevelMask, float], ...]:
    # sorted() is stable, so equal fitness keeps first-discovered order
    return tuple(sorted(seen.items(), key=lambda kv: -kv[1])[:n])


def bpso_select(
    evaluator: FitnessEvaluator,
    config: BpsoConfig,
    map_fn: Callable = map,
) -> BpsoResult:
    """Maximize ``evaluator`` over level masks with a binary swarm.

    Each (iteration, particle) pair draws from its own random stream derived
    from ``config.seed``, so the outcome does not depend on the order in which
    ``map_fn`` evaluates particles.  Bests only move on strict improvement.
    """
    K = config.swarm_size
    seen: dict[LevelMask, float] = {}

    def score(masks):
        values = evaluate_all(evaluator, masks, map_fn)
        for m, f in zip(masks, values):
            seen.setdefault(m, f)
        return values

    positions, velocities = [], []
    for k in range(K):
        rng = np.random.default_rng([config.seed, 0, k])
        positions.append(LevelMask.from_array((rng.random(N_LEVELS) < 0.5).astype(int)))
        velocities.append(rng.uniform(-config.v_max, config.v_max, N_LEVELS))
    fitness = score(positions)

    particles = [Particle(positions[k], velocities[k], positions[k], fitness[k]) for k in range(K)]
    g_best, g_fit = positions[0], fitness[0]
    for k in range(1, K):
        if fitness[k] > g_fit:
            g_best, g_fit = positions[k], fitness[k]
    history = [
        IterationRecord(0, config.w_start, tuple(positions), tuple(fitness), g_best, g_fit, _ranked(seen))
    ]

    for it in range(1, config.iterations + 1):
        w = config.inertia(it)
        new_pos, new_vel = [], []
        for k, p in enumerate(particles):
            rng = np.random.default_rng([config.seed, it, k])
            r1, r2 = rng.random(2)
            r3 = rng.random(N_LEVELS)
            v = velocity_update(p, g_best, w, config.c1, config.c2, r1, r2, config.v_max)
            new_vel.append(v)
            new_pos.append(position_update(p, v, r3))
        fitness = score(new_pos)
        updated = []
        for k, p in enumerate(particles):
            if fitness[k] > p.personal_best_fitness:
                updated.append(Particle(new_pos[k], new_vel[k], new_pos[k], fitness[k]))
            else:
                updated.append(Particle(new_pos[k], new_vel[k], p.personal_best, p.personal_best_fitness))
        particles = updated
        for k in range(K):
            if fitness[k] > g_fit:
                g_best, g_fit = new_pos[k], fitness[k]
        history.append(IterationRecord(it, w, tuple(new_pos), tuple(fitness), g_best, g_fit, _ranked(seen)))

    last_w = history[-1].inertia
    state = SwarmState(tuple(particles), g_best, g_fit, config.iterations, last_w, tuple(history))
    return BpsoResult(g_best, g_fit, _ranked(seen), tuple(history), state)


__all__ = [
    "BpsoConfig",
    "BpsoResult",
    "IterationRecord",
    "Particle",
    "SelectionError",
    "SwarmState",
    "bpso_select",
    "position_update",
    "velocity_update",
]
