"""Synthetic ten-level books with a planted, level-specific signal.

Mid-price moves are scheduled in advance: at every event a move is announced
with probability ``move_rate`` (direction up/down with equal odds) and
realized ``lead`` events later as a multiplicative jump of ``move_size``.
The latent movement state of an event is the net direction of the moves
announced but not yet realized, weighted toward the imminent ones.

Only volumes carry the state.  At an informative level k the bid/ask volume
imbalance is ``rho_k * state + sqrt(1 - rho_k**2) * noise``; every other
level draws the imbalance from the same noise distribution alone.  Because
announcements are independent draws, past prices hold no information about
future moves, so with ``signal_strength == 0`` labels are unpredictable.
"""
from __future__ import annotations

import datetime as _dt
from decimal import Decimal
from dataclasses import dataclass, field

import numpy as np

from .lob_data import N_LEVELS, LobEvent

SESSION_OPEN_NS = (9 * 3600 + 30 * 60) * 10**9


@dataclass(frozen=True)
class SynthConfig:
    days: int = 10
    events_per_day: int = 2000
    informative_levels: frozenset = field(default_factory=lambda: frozenset({1}))
    signal_strength: float = 0.9
    base_price: float = 100.0
    tick: float = 0.01
    seed: int = 0
    # per-level multiplier on signal_strength (index k-1); None means all 1
    level_weights: tuple | None = None
    move_rate: float = 0.1
    lead: int = 10
    move_size: float = 0.03
    base_volume: float = 500.0
    start_date: str = "2015-09-22"

    def __post_init__(self):
        object.__setattr__(self, "informative_levels", frozenset(int(k) for k in self.informative_levels))
        if self.level_weights is not None:
            object.__setattr__(self, "level_weights", tuple(float(w) for w in self.level_weights))
        self.validate()

    def validate(self) -> None:
        if self.days < 1 or self.events_per_day < 1:
            raise ValueError("days and events_per_day must be >= 1")
        if any(not 1 <= k <= N_LEVELS for k in self.informative_levels):
            raise ValueError("informative levels must lie in 1..10")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError("signal_strength must be in [0, 1]")
        if not self.base_price > 0 or not self.tick > 0:
            raise ValueError("base_price and tick must be positive")
        if self.base_price / self.tick < 100:
            raise ValueError("base_price must span at least 100 ticks")
        if self.level_weights is not None:
            if len(self.level_weights) != N_LEVELS or any(not 0 <= w <= 1 for w in self.level_weights):
                raise ValueError("level_weights needs 10 entries in [0, 1]")
        if not 0.0 <= self.move_rate <= 1.0:
            raise ValueError("move_rate must be in [0, 1]")
        if self.lead < 1:
            raise ValueError("lead must be >= 1")
        if not 0.0 <= self.move_size < 1.0:
            raise ValueError("move_size must be in [0, 1)")
        if not self.base_volume >= 1:
            raise ValueError("base_volume must be >= 1")
        _dt.date.fromisoformat(self.start_date)

    def level_strengths(self) -> np.ndarray:
        """Signal correlation per level (zero outside the informative set)."""
        weights = np.ones(N_LEVELS) if self.level_weights is None else np.array(self.level_weights)
        rho = np.zeros(N_LEVELS)
        for k in self.informative_levels:
            rho[k - 1] = self.signal_strength * weights[k - 1]
        return rho


def trading_dates(start: str, days: int) -> list[str]:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return [str(np.busday_offset(first, i)) for i in range(days)]


def latent_state(starts: np.ndarray, directions: np.ndarray, lead: int) -> np.ndarray:
    """Net pending-move direction per event, in {-1, 0, +1}.

    A move announced at ``a`` is pending over ``a .. a+lead-1``; at event u
    it weighs ``lead - (a + lead - u) + 1``, i.e. more as the jump nears.
    """
    n = len(starts)
    score = np.zeros(n)
    for a in np.flatnonzero(starts):
        u = np.arange(a, min(a + lead, n))
        score[u] += directions[a] * (u - a + 1)
    return np.sign(score).astype(np.int64)


def _day(cfg: SynthConfig, rng: np.random.Generator, day: int, date: str, rho: np.ndarray) -> list[LobEvent]:
    n = cfg.events_per_day
    starts = rng.random(n) < cfg.move_rate
    directions = np.where(rng.random(n) < 0.5, 1, -1)
    state = latent_state(starts, directions, cfg.lead)

    jumps = np.zeros(n)
    for a in np.flatnonzero(starts):
        if a + cfg.lead < n:
            jumps[a + cfg.lead] += directions[a] * cfg.move_size
    mid = cfg.base_price * np.exp(np.cumsum(jumps))

    spread = rng.integers(1, 4, size=n)
    bid1 = np.round(mid / cfg.tick - spread / 2.0).astype(np.int64)
    ask_ticks = (bid1 + spread)[:, None] + np.concatenate(
        [np.zeros((n, 1), dtype=np.int64), np.cumsum(rng.integers(1, 3, size=(n, N_LEVELS - 1)), axis=1)], axis=1
    )
    bid_ticks = bid1[:, None] - np.concatenate(
        [np.zeros((n, 1), dtype=np.int64), np.cumsum(rng.integers(1, 3, size=(n, N_LEVELS - 1)), axis=1)], axis=1
    )
    if bid_ticks.min() < 1:
        raise ValueError("price path fell below ten ticks; raise base_price or lower move_size")

    noise = rng.standard_normal((n, N_LEVELS))
    imbalance = rho[None, :] * state[:, None] + np.sqrt(1.0 - rho**2)[None, :] * noise
    depth = 0.3 * rng.standard_normal((n, N_LEVELS))
    ask_vol = np.maximum(1.0, np.round(cfg.base_volume * np.exp(depth - 0.5 * imbalance)))
    bid_vol = np.maximum(1.0, np.round(cfg.base_volume * np.exp(depth + 0.5 * imbalance)))

    gaps = rng.exponential(1e7, size=n).astype(np.int64) + 1
    day_ns = int(np.datetime64(date, "ns").astype(np.int64))
    stamps = day_ns + SESSION_OPEN_NS + np.cumsum(gaps)

    # round off the float noise of ticks * tick so files print clean prices
    places = max(0, -Decimal(repr(cfg.tick)).as_tuple().exponent)
    ask_p = np.round(ask_ticks * cfg.tick, places).tolist()
    bid_p = np.round(bid_ticks * cfg.tick, places).tolist()
    ask_v = ask_vol.tolist()
    bid_v = bid_vol.tolist()
    return [
        LobEvent(int(stamps[i]), day, tuple(ask_p[i]), tuple(ask_v[i]), tuple(bid_p[i]), tuple(bid_v[i]), date)
        for i in range(n)
    ]


def generate(config: SynthConfig) -> list[LobEvent]:
    """Deterministic event stream for ``config`` (one list covering all days)."""
    config.validate()
    rho = config.level_strengths()
    rng = np.random.default_rng(config.seed)
    events: list[LobEvent] = []
    for day, date in enumerate(trading_dates(config.start_date, config.days)):
        events.extend(_day(config, rng, day, date, rho))
    return events
