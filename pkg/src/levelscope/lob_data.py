"""Order-book event ingestion, sliding-window samples, labels and normalization.

A sample at in-day index ``t`` is the 40 x T matrix whose columns are the T most
recent book snapshots (``t-T+1 .. t``).  Rows come in blocks of four per level,
level 1 first: ask price, ask volume, bid price, bid volume.
"""
from __future__ import annotations

import csv
import datetime as _dt
import math
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

N_LEVELS = 10
N_ROWS = 4 * N_LEVELS
N_COLUMNS = 2 + N_ROWS

EVENT_HEADER: tuple[str, ...] = ("date", "timestamp_ns") + tuple(
    f"{name}_{k}"
    for k in range(1, N_LEVELS + 1)
    for name in ("ask_price", "ask_volume", "bid_price", "bid_volume")
)


class EventParseError(ValueError):
    """Malformed event record (wrong column count or non-numeric field)."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EventValidationError(ValueError):
    """Event record that breaks a book invariant."""

    def __init__(self, line: int, level: int | None, message: str):
        where = f"line {line}" + (f", level {level}" if level is not None else "")
        super().__init__(f"{where}: {message}")
        self.line = line
        self.level = level


class MovementLabel(IntEnum):
    UP = 0
    DOWN = 1
    STATIONARY = 2


@dataclass(frozen=True)
class LobEvent:
    """One ten-level book snapshot.

    Level ``k`` (1-based) lives at index ``k - 1`` of each price/volume tuple.
    """

    timestamp: int
    day_index: int
    ask_price: tuple[float, ...]
    ask_volume: tuple[float, ...]
    bid_price: tuple[float, ...]
    bid_volume: tuple[float, ...]
    date: str = ""

    @property
    def mid_price(self) -> float:
        return (self.ask_price[0] + self.bid_price[0]) / 2.0

    @property
    def spread(self) -> float:
        return self.ask_price[0] - self.bid_price[0]

    def features(self) -> np.ndarray:
        """The 40 values of this snapshot in window-row order."""
        out = np.empty(N_ROWS)
        out[0::4] = self.ask_price
        out[1::4] = self.ask_volume
        out[2::4] = self.bid_price
        out[3::4] = self.bid_volume
        return out

    def violations(self) -> list[tuple[int | None, str]]:
        """Book-invariant violations as ``(level, message)`` pairs."""
        found: list[tuple[int | None, str]] = []
        for name in ("ask_price", "ask_volume", "bid_price", "bid_volume"):
            values = getattr(self, name)
            if len(values) != N_LEVELS:
                found.append((None, f"{name} has {len(values)} levels, expected {N_LEVELS}"))
                return found
            for k, v in enumerate(values, start=1):
                if not math.isfinite(v):
                    found.append((k, f"{name}_{k} is not finite"))
        if found:
            return found
        if not self.ask_price[0] > self.bid_price[0]:
            found.append((1, f"non-positive spread: ask_price_1={self.ask_price[0]} <= bid_price_1={self.bid_price[0]}"))
        for k in range(2, N_LEVELS + 1):
            if not self.ask_price[k - 1] > self.ask_price[k - 2]:
                found.append((k, f"ask_price_{k}={self.ask_price[k - 1]} not above ask_price_{k - 1}={self.ask_price[k - 2]}"))
            if not self.bid_price[k - 1] < self.bid_price[k - 2]:
                found.append((k, f"bid_price_{k}={self.bid_price[k - 1]} not below bid_price_{k - 1}={self.bid_price[k - 2]}"))
        for k in range(1, N_LEVELS + 1):
            if not self.ask_volume[k - 1] > 0:
                found.append((k, f"ask_volume_{k}={self.ask_volume[k - 1]} not positive"))
            if not self.bid_volume[k - 1] > 0:
                found.append((k, f"bid_volume_{k}={self.bid_volume[k - 1]} not positive"))
        return found


@dataclass(frozen=True)
class SampleWindow:
    matrix: np.ndarray
    label: MovementLabel
    origin_time_index: int
    day_index: int = 0


class WindowSet(Sequence):
    """Array-backed, read-only sequence of :class:`SampleWindow`.

    ``matrices`` has shape (N, 40, T); ``labels``, ``days`` and ``origins``
    have shape (N,).  Indexing with an int yields a SampleWindow, with a
    slice or index array yields another WindowSet.
    """

    def __init__(self, matrices, labels, days=None, origins=None):
        matrices = np.asarray(matrices, dtype=np.float64)
        if matrices.ndim != 3 or matrices.shape[1] != N_ROWS:
            raise ValueError(f"matrices must have shape (N, {N_ROWS}, T), got {matrices.shape}")
        n = matrices.shape[0]
        labels = np.asarray(labels, dtype=np.int64).reshape(n)
        days = np.zeros(n, dtype=np.int64) if days is None else np.asarray(days, dtype=np.int64).reshape(n)
        origins = np.arange(n, dtype=np.int64) if origins is None else np.asarray(origins, dtype=np.int64).reshape(n)
        for arr in (matrices, labels, days, origins):
            arr.setflags(write=False)
        self.matrices = matrices
        self.labels = labels
        self.days = days
        self.origins = origins

    @classmethod
    def empty(cls, T: int) -> WindowSet:
        return cls(np.zeros((0, N_ROWS, T)), np.zeros(0))

    @classmethod
    def from_windows(cls, windows: Iterable[SampleWindow], T: int | None = None) -> WindowSet:
        windows = list(windows)
        if not windows:
            if T is None:
                raise ValueError("cannot infer T from an empty window list")
            return cls.empty(T)
        return cls(
            np.stack([w.matrix for w in windows]),
            [int(w.label) for w in windows],
            [w.day_index for w in windows],
            [w.origin_time_index for w in windows],
        )

    @classmethod
    def concat(cls, parts: Sequence[WindowSet], T: int) -> WindowSet:
        parts = [p for p in parts if len(p)]
        if not parts:
            return cls.empty(T)
        return cls(
            np.concatenate([p.matrices for p in parts]),
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.days for p in parts]),
            np.concatenate([p.origins for p in parts]),
        )

    @property
    def window_length(self) -> int:
        return self.matrices.shape[2]

    def __len__(self) -> int:
        return self.matrices.shape[0]

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            i = int(index)
            return SampleWindow(
                self.matrices[i], MovementLabel(int(self.labels[i])), int(self.origins[i]), int(self.days[i])
            )
        return WindowSet(self.matrices[index], self.labels[index], self.days[index], self.origins[index])

    def __iter__(self) -> Iterator[SampleWindow]:
        for i in range(len(self)):
            yield self[i]

    def __repr__(self) -> str:
        return f"WindowSet(n={len(self)}, T={self.window_length})"


def as_window_set(windows, T: int | None = None) -> WindowSet:
    if isinstance(windows, WindowSet):
        return windows
    return WindowSet.from_windows(windows, T)


@dataclass(frozen=True)
class NormStats:
    """Per-row mean and standard deviation (40 entries each)."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        for name in ("mean", "std"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).reshape(N_ROWS)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class Dataset:
    train: WindowSet
    validation: WindowSet
    test: WindowSet
    horizon: int
    window_length: int
    normalization_stats: NormStats
    alpha: float = 0.002
    day_ids: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# parsing


def _parse_date(text: str, line: int) -> _dt.date:
    try:
        return _dt.date.fromisoformat(text.strip())
    except ValueError:
        raise EventParseError(line, f"bad date {text!r}, expected YYYY-MM-DD") from None


def parse_events(path, validate: bool = True) -> list[LobEvent]:
    """Read an event file (42 comma-separated columns, header required).

    ``day_index`` is the ordinal of the row's date among the distinct dates
    of the file, in sorted order.  Numbers are parsed locale-independently.
    """
    path = Path(path)
    rows: list[tuple[int, str, int, list[float]]] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EventParseError(1, "missing header line")
        if len(header) != N_COLUMNS:
            raise EventParseError(1, f"header has {len(header)} columns, expected {N_COLUMNS}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != N_COLUMNS:
                raise EventParseError(line_no, f"expected {N_COLUMNS} columns, got {len(row)}")
            _parse_date(row[0], line_no)
            try:
                ts = int(row[1])
            except ValueError:
                raise EventParseError(line_no, f"non-integer timestamp {row[1]!r}") from None
            values = []
            for col, text in enumerate(row[2:], start=2):
                try:
                    # float() ignores locale; reject comma decimals explicitly
                    values.append(float(text))
                except ValueError:
                    raise EventParseError(line_no, f"non-numeric value {text!r} in column {EVENT_HEADER[col]}") from None
            rows.append((line_no, row[0].strip(), ts, values))

    day_of = {d: i for i, d in enumerate(sorted({r[1] for r in rows}))}
    events: list[LobEvent] = []
    last_ts: dict[int, int] = {}
    for line_no, date, ts, values in rows:
        day = day_of[date]
        ev = LobEvent(
            timestamp=ts,
            day_index=day,
            ask_price=tuple(values[0::4]),
            ask_volume=tuple(values[1::4]),
            bid_price=tuple(values[2::4]),
            bid_volume=tuple(values[3::4]),
            date=date,
        )
        if validate:
            bad = ev.violations()
            if bad:
                level, msg = bad[0]
                raise EventValidationError(line_no, level, msg)
            if day in last_ts and ts < last_ts[day]:
                raise EventValidationError(line_no, None, f"timestamp {ts} earlier than previous event of the same day")
        last_ts[day] = ts
        events.append(ev)
    return events


def _format_number(x: float) -> str:
    return repr(float(x))


def write_events(events: Iterable[LobEvent], path, base_date: str = "2015-09-22") -> None:
    """Write events in the 42-column format; events without a date get one from day_index."""
    base = _dt.date.fromisoformat(base_date)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_HEADER)
        for ev in events:
            date = ev.date or (base + _dt.timedelta(days=ev.day_index)).isoformat()
            row = [date, str(int(ev.timestamp))]
            for k in range(N_LEVELS):
                row += [
                    _format_number(ev.ask_price[k]),
                    _format_number(ev.ask_volume[k]),
                    _format_number(ev.bid_price[k]),
                    _format_number(ev.bid_volume[k]),
                ]
            writer.writerow(row)


def validate_events(events: Sequence[LobEvent]) -> list[str]:
    """All invariant violations in ``events``; empty when the stream is clean."""
    report = []
    last_ts: dict[int, int] = {}
    for i, ev in enumerate(events):
        for level, msg in ev.violations():
            where = f"event {i}" + (f", level {level}" if level is not None else "")
            report.append(f"{where}: {msg}")
        if ev.day_index in last_ts and ev.timestamp < last_ts[ev.day_index]:
            report.append(f"event {i}: timestamp decreases within day {ev.day_index}")
        last_ts[ev.day_index] = ev.timestamp
    return report


# --------------------------------------------------------------------------
# windows and labels


def _split_days(events: Sequence[LobEvent]) -> list[tuple[int, list[LobEvent]]]:
    days: dict[int, list[LobEvent]] = {}
    for ev in events:
        days.setdefault(ev.day_index, []).append(ev)
    return sorted(days.items())


def _mid_prices(events: Sequence[LobEvent]) -> np.ndarray:
    return np.array([(ev.ask_price[0] + ev.bid_price[0]) / 2.0 for ev in events])


def _labels_from_mids(mids: np.ndarray, H: int, alpha: float) -> np.ndarray:
    """Label for every index t with H successors (length ``len(mids) - H``)."""
    n = len(mids) - H
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    future = sliding_window_view(mids[1:], H)[:n]
    change = future.mean(axis=1) / mids[:n] - 1.0
    labels = np.full(n, int(MovementLabel.STATIONARY), dtype=np.int64)
    labels[change > alpha] = int(MovementLabel.UP)
    labels[change < -alpha] = int(MovementLabel.DOWN)
    return labels


def label_midprice(events: Sequence[LobEvent], t: int, H: int, alpha: float) -> MovementLabel:
    """Movement label of the mean of the next H mid-prices relative to mid at t."""
    if H < 1:
        raise ValueError("H must be >= 1")
    if t < 0 or t + H >= len(events):
        raise IndexError(f"need {H} events after index {t}, have {len(events) - t - 1}")
    day = events[t].day_index
    if events[t + H].day_index != day:
        raise IndexError(f"horizon from index {t} crosses the end of day {day}")
    mids = _mid_prices(events[t : t + H + 1])
    return MovementLabel(int(_labels_from_mids(mids, H, alpha)[0]))


def _day_windows(day_events: Sequence[LobEvent], day: int, T: int, H: int, alpha: float) -> WindowSet:
    n = len(day_events)
    count = n - T - H + 1
    if count <= 0:
        return WindowSet.empty(T)
    feats = np.stack([ev.features() for ev in day_events])  # (n, 40)
    # windows[i] covers columns t-T+1..t with t = T-1+i
    stacked = sliding_window_view(feats, T, axis=0)[:count]  # (count, 40, T)
    labels = _labels_from_mids(_mid_prices(day_events), H, alpha)[T - 1 : T - 1 + count]
    origins = np.arange(T - 1, T - 1 + count)
    return WindowSet(np.ascontiguousarray(stacked), labels, np.full(count, day), origins)


def build_windows(events: Sequence[LobEvent], T: int, H: int, alpha: float) -> WindowSet:
    """All valid windows of every day, in chronological order."""
    if T < 1 or H < 1:
        raise ValueError(f"T and H must be >= 1 (got T={T}, H={H})")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return WindowSet.concat([_day_windows(evs, day, T, H, alpha) for day, evs in _split_days(events)], T)


# --------------------------------------------------------------------------
# normalization


def compute_stats(train_windows) -> NormStats:
    """Per-row population mean/std over every window and column.

    A constant row gets std 1 so that normalizing it yields zeros.
    """
    ws = as_window_set(train_windows)
    if len(ws) == 0:
        raise ValueError("cannot compute statistics of an empty training set")
    mean = ws.matrices.mean(axis=(0, 2))
    std = ws.matrices.std(axis=(0, 2))
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    std = np.where(constant, 1.0, std)
    return NormStats(mean, std)


def _check_stats(stats: NormStats) -> None:
    if stats.mean.shape != (N_ROWS,) or stats.std.shape != (N_ROWS,):
        raise ValueError("normalization stats must have 40 entries")
    if np.any(~(stats.std > 0)):
        raise ValueError("normalization stds must be positive")


def normalize(windows, stats: NormStats) -> WindowSet:
    _check_stats(stats)
    ws = as_window_set(windows)
    z = (ws.matrices - stats.mean[None, :, None]) / stats.std[None, :, None]
    return WindowSet(z, ws.labels, ws.days, ws.origins)


def denormalize(windows, stats: NormStats) -> WindowSet:
    _check_stats(stats)
    ws = as_window_set(windows)
    x = ws.matrices * stats.std[None, :, None] + stats.mean[None, :, None]
    return WindowSet(x, ws.labels, ws.days, ws.origins)


def split_dataset(
    events: Sequence[LobEvent],
    train_days: int,
    test_days: int,
    validation_fraction: float,
    T: int,
    H: int,
    alpha: float,
) -> Dataset:
    """Chronological train/validation/test split by trading day.

    The first ``train_days`` days feed train and validation (validation is the
    last ``floor(validation_fraction * n)`` of those windows); the last
    ``test_days`` days feed the test partition.  Statistics come from the
    train partition alone.
    """
    if not 0 <= validation_fraction < 1:
        raise ValueError("validation_fraction must be in [0, 1)")
    if train_days < 1 or test_days < 0:
        raise ValueError("train_days must be >= 1 and test_days >= 0")
    days = _split_days(events)
    if len(days) < train_days + test_days:
        raise ValueError(f"need {train_days + test_days} days, data has {len(days)}")
    train_part = days[:train_days]
    test_part = days[len(days) - test_days :] if test_days else []

    fit = WindowSet.concat([_day_windows(e, d, T, H, alpha) for d, e in train_part], T)
    test = WindowSet.concat([_day_windows(e, d, T, H, alpha) for d, e in test_part], T)
    n_val = int(math.floor(validation_fraction * len(fit)))
    train = fit[: len(fit) - n_val]
    validation = fit[len(fit) - n_val :]
    if len(train) == 0:
        raise ValueError("training partition is empty")
    stats = compute_stats(train)
    return Dataset(
        train=normalize(train, stats),
        validation=normalize(validation, stats),
        test=normalize(test, stats),
        horizon=H,
        window_length=T,
        normalization_stats=stats,
        alpha=alpha,
        day_ids={"train": [d for d, _ in train_part], "test": [d for d, _ in test_part]},
    )
