"""Level subsets and their expansion to input masks."""
from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .lob_data import N_LEVELS, N_ROWS


@dataclass(frozen=True, order=True)
class LevelMask:
    """Ten inclusion bits; ``bits[k - 1] == 1`` keeps book level k.

    The text form is a 10-character 0/1 string with level 1 leftmost.
    """

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if len(bits) != N_LEVELS or any(b not in (0, 1) for b in bits):
            raise ValueError(f"a level mask needs {N_LEVELS} bits of 0/1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def full(cls) -> LevelMask:
        return cls((1,) * N_LEVELS)

    @classmethod
    def empty(cls) -> LevelMask:
        return cls((0,) * N_LEVELS)

    @classmethod
    def from_string(cls, text: str) -> LevelMask:
        text = text.strip()
        if len(text) != N_LEVELS or set(text) - {"0", "1"}:
            raise ValueError(f"mask string must be {N_LEVELS} characters of 0/1, got {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def from_array(cls, arr) -> LevelMask:
        return cls(tuple(int(b) for b in np.asarray(arr).reshape(-1)))

    @property
    def levels(self) -> frozenset[int]:
        return frozenset(k for k, b in enumerate(self.bits, start=1) if b)

    @property
    def popcount(self) -> int:
        return sum(self.bits)

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.float64)

    def without(self, level: int) -> LevelMask:
        bits = list(self.bits)
        bits[level - 1] = 0
        return LevelMask(tuple(bits))

    def __and__(self, other: LevelMask) -> LevelMask:
        return LevelMask(tuple(a & b for a, b in zip(self.bits, other.bits)))

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def mask_from_levels(levels: Iterable[int]) -> LevelMask:
    bits = [0] * N_LEVELS
    for k in levels:
        if not isinstance(k, (int, np.integer)) or not 1 <= k <= N_LEVELS:
            raise ValueError(f"level {k!r} outside 1..{N_LEVELS}")
        bits[int(k) - 1] = 1
    return LevelMask(tuple(bits))


def _check_T(T: int) -> None:
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")


def row_levels() -> np.ndarray:
    """Book level (1-based) owning each of the 40 rows: floor(i/4) + 1 for 0-based i."""
    return np.arange(N_ROWS) // 4 + 1


def mask_matrix(s: LevelMask, T: int) -> np.ndarray:
    """40 x T binary matrix; row i (1-based) copies bit floor((i-1)/4)+1."""
    _check_T(T)
    rows = s.as_array()[row_levels() - 1]
    return np.repeat(rows[:, None], T, axis=1)


def level_expansion() -> np.ndarray:
    """The 40 x 10 constant matrix with a one at (i, floor((i-1)/4)+1)."""
    I1 = np.zeros((N_ROWS, N_LEVELS))
    for i in range(1, N_ROWS + 1):
        I1[i - 1, (i - 1) // 4] = 1.0
    return I1


def mask_matrix_oracle(s: LevelMask, T: int) -> np.ndarray:
    """Same mask built as the product I1 . s . I2 (I2 a 1 x T row of ones)."""
    _check_T(T)
    I1 = level_expansion()
    I2 = np.ones((1, T))
    return I1 @ s.as_array().reshape(N_LEVELS, 1) @ I2


def apply_mask(X: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Elementwise product; broadcasts over a leading batch axis of X."""
    X = np.asarray(X, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or X.shape[-2:] != M.shape:
        raise ValueError(f"shape mismatch: X {X.shape} vs mask {M.shape}")
    return X * M
