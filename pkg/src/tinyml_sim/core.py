"""Energy primitives, the ideal battery and deterministic random streams.

All energies are integer microwatt-hours (uWh). Integers keep the ledger
exactly conservative over long episodes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

Energy = int  # microwatt-hours

MASK64 = 0xFFFFFFFFFFFFFFFF
_TWO_POW_53 = 1.0 / 9007199254740992.0

DEFAULT_CAPACITY_UWH = 17_500_000  # 5 V x 3.5 Ah


class Exhausted(Exception):
    """Raised when a draw exceeds the energy left in the battery."""

    def __init__(self, requested: int, remaining: int):
        super().__init__(f"requested {requested} uWh with {remaining} uWh remaining")
        self.requested = requested
        self.remaining = remaining


class EnergyTableError(ValueError):
    pass


def check_energy(value, name: str = "energy") -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError(f"{name} must be an integer number of uWh, got {value!r}")
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


@dataclass(frozen=True)
class EnergyTable:
    """Per-state/action energy costs in uWh.

    The defaults are the datasheet-derived averages for the STM32F746 /
    OV2640 / SIM7000E node. ``sleep_per_iteration`` is one hour of sleep.
    """

    sleep_per_iteration: int = 50
    image_capture: int = 180
    infer: int = 17
    upload: int = 3000
    train_per_image: int = 556

    def __post_init__(self):
        for name in ("sleep_per_iteration", "image_capture", "infer", "upload", "train_per_image"):
            value = check_energy(getattr(self, name), name)
            if value == 0:
                raise EnergyTableError(f"{name} must be strictly positive")
        # upload and training must dominate the per-sample work
        if not self.upload > self.image_capture:
            raise EnergyTableError("upload must exceed image_capture")
        if not self.upload > self.infer:
            raise EnergyTableError("upload must exceed infer")
        if not self.train_per_image > self.infer:
            raise EnergyTableError("train_per_image must exceed infer")

    @property
    def per_iteration(self) -> int:
        """Fixed cost of one wake/capture/infer/sleep cycle."""
        return self.sleep_per_iteration + self.image_capture + self.infer


class Battery:
    """Single-use ideal battery. Energy only ever leaves it."""

    __slots__ = ("capacity", "remaining", "empty")

    def __init__(self, capacity: int = DEFAULT_CAPACITY_UWH, remaining: int | None = None):
        self.capacity = check_energy(capacity, "capacity")
        self.remaining = self.capacity if remaining is None else check_energy(remaining, "remaining")
        if self.remaining > self.capacity:
            raise ValueError("remaining cannot exceed capacity")
        self.empty = False

    def consume(self, amount: int) -> int:
        """Draw ``amount`` uWh and return what is left.

        Raises :class:`Exhausted` (and flags the battery empty) when the
        draw cannot be funded; nothing is drawn in that case.
        """
        if amount < 0:
            raise ValueError(f"cannot consume a negative amount ({amount})")
        if amount > self.remaining:
            self.empty = True
            raise Exhausted(amount, self.remaining)
        self.remaining -= amount
        return self.remaining

    @property
    def fraction(self) -> float:
        if self.capacity == 0:
            return 0.0
        return self.remaining / self.capacity

    @property
    def used(self) -> int:
        return self.capacity - self.remaining

    def __repr__(self):
        return f"Battery(capacity={self.capacity}, remaining={self.remaining})"


# --- random streams -------------------------------------------------------


class StreamId(enum.IntEnum):
    ENVIRONMENT = 0
    RETRAIN = 1
    EXPLORATION = 2


# Per-stream salt XORed into the seed before SplitMix64 expansion. Adding a
# multiple of the SplitMix increment instead would make streams overlap.
_STREAM_SALT = 0xD1B54A32D192ED03


def splitmix64(state: int) -> tuple[int, int]:
    """One SplitMix64 step. Returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


class Xoshiro256StarStar:
    """xoshiro256** 1.0 over Python ints."""

    __slots__ = ("s0", "s1", "s2", "s3")

    def __init__(self, s0: int, s1: int, s2: int, s3: int):
        if not (s0 | s1 | s2 | s3):
            raise ValueError("xoshiro256** state must not be all zero")
        self.s0, self.s1, self.s2, self.s3 = s0 & MASK64, s1 & MASK64, s2 & MASK64, s3 & MASK64

    @classmethod
    def from_seed(cls, seed: int) -> "Xoshiro256StarStar":
        state = seed & MASK64
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        return cls(*words)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        t = (s1 * 5) & MASK64
        result = ((((t << 7) | (t >> 57)) & MASK64) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def fill_uniform(self, n: int) -> list[float]:
        """``n`` doubles in [0, 1); same values as ``n`` calls of next_u64."""
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        out = [0.0] * n
        for i in range(n):
            t = (s1 * 5) & MASK64
            out[i] = (((((t << 7) | (t >> 57)) & MASK64) * 9 & MASK64) >> 11) * _TWO_POW_53
            t = (s1 << 17) & MASK64
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return out


def _fill_block_py(state: np.ndarray, out: np.ndarray) -> None:
    g = Xoshiro256StarStar(*(int(x) for x in state))
    out[:] = g.fill_uniform(out.shape[0])
    state[:] = np.array([g.s0, g.s1, g.s2, g.s3], dtype=np.uint64)


if numba is not None:
    @numba.njit(cache=True)
    def _fill_block_jit(state, out):  # pragma: no cover - compiled
        s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
        scale = 1.0 / 9007199254740992.0
        for i in range(out.shape[0]):
            t = s1 * np.uint64(5)
            r = ((t << np.uint64(7)) | (t >> np.uint64(57))) * np.uint64(9)
            out[i] = np.float64(r >> np.uint64(11)) * scale
            t = s1 << np.uint64(17)
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
        state[0], state[1], state[2], state[3] = s0, s1, s2, s3

    _fill_block = _fill_block_jit
else:  # pragma: no cover
    _fill_block = _fill_block_py


class RandomStream:
    """A named, reproducible uniform stream.

    The generator is seeded from ``seed ^ ((stream_id + 1) * salt)`` through
    SplitMix64; each uniform takes the top 53 bits of one output word.
    Draws are produced in blocks, which does not change the sequence.
    """

    __slots__ = ("seed", "stream_id", "_state", "_buf", "_list", "_pos", "_consumed", "_fill")

    BLOCK = 4096

    def __init__(self, seed: int, stream_id: StreamId | int, jit: bool = True):
        self.seed = int(seed) & MASK64
        self.stream_id = StreamId(stream_id)
        mixed = self.seed ^ (((int(self.stream_id) + 1) * _STREAM_SALT) & MASK64)
        g = Xoshiro256StarStar.from_seed(mixed)
        self._state = np.array([g.s0, g.s1, g.s2, g.s3], dtype=np.uint64)
        self._fill = _fill_block if jit else _fill_block_py
        self._buf = np.empty(0)
        self._list: list[float] = []
        self._pos = 0
        self._consumed = 0  # draws handed out from blocks before the current one

    def _refill(self) -> None:
        self._consumed += len(self._list)
        self._buf = np.empty(self.BLOCK)
        self._fill(self._state, self._buf)
        self._list = self._buf.tolist()
        self._pos = 0

    @property
    def draws(self) -> int:
        return self._consumed + self._pos

    def uniform(self) -> float:
        pos = self._pos
        if pos == len(self._list):
            self._refill()
            pos = 0
        self._pos = pos + 1
        return self._list[pos]

    def skip_until_below(self, threshold: float, limit: int) -> tuple[int, bool]:
        """Consume draws until one falls below ``threshold`` or ``limit``
        draws have been taken.

        Returns ``(k, hit)``: ``k`` draws at or above the threshold were
        consumed, and ``hit`` tells whether a further draw below it was
        consumed too (never more than ``limit`` draws in total).
        """
        k = 0
        while k < limit:
            if self._pos == len(self._list):
                self._refill()
            # short scan first: numpy setup costs more than a few list reads
            lst, pos = self._list, self._pos
            stop = min(pos + 24, len(lst), pos + (limit - k))
            for i in range(pos, stop):
                if lst[i] < threshold:
                    self._pos = i + 1
                    return k + i - pos, True
            k += stop - pos
            self._pos = stop
            if k >= limit or stop == len(lst):
                continue
            window = self._buf[self._pos:self._pos + (limit - k)]
            below = np.flatnonzero(window < threshold)
            if below.size:
                j = int(below[0])
                self._pos += j + 1
                return k + j, True
            self._pos += window.shape[0]
            k += window.shape[0]
        return k, False

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id.name}, draws={self.draws})"


def uniform(stream: RandomStream) -> float:
    return stream.uniform()
