"""Retrain-or-continue policies: static threshold, adaptive threshold and a
tabular Q-learner with an 800-byte value table.

Policies are consulted only after an anomaly has been labelled by the
server, i.e. when the node holds a fresh training image.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import EnergyTable, RandomStream

BATTERY_BINS = 10
COUNT_BINS = 10
COUNT_BIN_WIDTH = 5
N_ACTIONS = 2
ENTRY_SIZE = 4
PAYLOAD_BYTES = BATTERY_BINS * COUNT_BINS * N_ACTIONS * ENTRY_SIZE  # 800
QTABLE_MAGIC = b"QTBL"
QTABLE_VERSION = 1
_HEADER = struct.Struct("<4sHBBBB6x")
HEADER_BYTES = _HEADER.size  # 16
DEFAULT_N_CAP = 255


class Decision(enum.IntEnum):
    CONTINUE = 0
    RETRAIN = 1


@dataclass
class NodeState:
    """What a policy sees at a decision point."""

    battery_fraction: float
    n_classified: int
    anomaly_flag: bool = True

    def __post_init__(self):
        if not 0.0 <= self.battery_fraction <= 1.0:
            raise ValueError(f"battery_fraction out of range: {self.battery_fraction}")
        if self.n_classified < 0:
            raise ValueError("n_classified must be non-negative")


@dataclass
class StepStats:
    """Accumulated activity between two consecutive decision points."""

    energy: int = 0
    iterations: int = 0
    onboard: int = 0
    uploads: int = 0
    train_energy: int = 0

    def clear(self):
        self.energy = 0
        self.iterations = 0
        self.onboard = 0
        self.uploads = 0
        self.train_energy = 0


# --- reward ---------------------------------------------------------------


def reward(step_energy: int) -> float:
    """Negative energy of the step in mWh."""
    return -step_energy / 1000.0


def savings_reward(onboard: int, train_energy: int, table: EnergyTable) -> float:
    """Upload energy avoided by onboard classification minus energy spent
    training, in mWh.

    Summed over an episode this equals ``(P_ref * life - capacity) / 1000``
    for the upload-everything reference power ``P_ref``, so a larger return
    means a longer battery life.
    """
    return (onboard * table.upload - train_energy) / 1000.0


def relative_reward(stats: StepStats, table: EnergyTable, rho: float) -> float:
    """Anomalies handled, priced at ``rho`` uWh each, minus the upload and
    training energy actually spent, in mWh.

    ``rho = table.upload`` reduces to :func:`savings_reward` for steps that
    end in an upload. With ``rho`` at the best achievable cost per anomaly,
    maximising the return maximises battery life.
    """
    anomalies = stats.onboard + stats.uploads
    spent = stats.uploads * table.upload + stats.train_energy
    return (rho * anomalies - spent) / 1000.0


REWARDS = ("relative", "savings", "energy")


def step_reward(kind: str, stats: StepStats, table: EnergyTable, rho: float | None = None) -> float:
    if kind == "relative":
        return relative_reward(stats, table, table.upload if rho is None else rho)
    if kind == "savings":
        return savings_reward(stats.onboard, stats.train_energy, table)
    if kind == "energy":
        return reward(stats.energy)
    raise ValueError(f"unknown reward kind {kind!r}")


# --- rule-based policies -------------------------------------------------


class Policy:
    name = "policy"

    def decide(self, state: NodeState, since_last: StepStats | None = None) -> Decision:
        raise NotImplementedError

    def observe_retrain(self, success: bool) -> None:
        pass

    def finish(self, since_last: StepStats | None = None) -> None:
        """Episode ended (battery exhausted)."""


class StaticPolicy(Policy):
    """Retrain once a fixed number of labelled anomalies is held."""

    name = "static"

    def __init__(self, threshold: int = 35, validation: float = 0.85):
        self.threshold = threshold
        self.validation = validation

    def decide(self, state, since_last=None):
        return Decision.RETRAIN if state.n_classified >= self.threshold else Decision.CONTINUE


class DynamicPolicy(Policy):
    """Threshold that grows after a failed retrain and shrinks after a run
    of ``reduce_after`` consecutive successes."""

    name = "dynamic"

    def __init__(self, threshold: int = 10, validation: float = 0.85,
                 reduce_after: int = 5, min_threshold: int = 1):
        if threshold < min_threshold:
            raise ValueError("initial threshold below min_threshold")
        self.threshold = threshold
        self.validation = validation
        self.reduce_after = reduce_after
        self.min_threshold = min_threshold
        self.successes = 0

    def decide(self, state, since_last=None):
        return Decision.RETRAIN if state.n_classified >= self.threshold else Decision.CONTINUE

    def observe_retrain(self, success):
        if success:
            self.successes += 1
            if self.successes >= self.reduce_after:
                self.threshold = max(self.threshold - 1, self.min_threshold)
        else:
            self.successes = 0
            self.threshold += 1


# --- Q-learning ------------------------------------------------------------


class QTableFormatError(ValueError):
    """A Q-table file with the wrong size, magic, version or layout."""


class QTable:
    """Dense float32 table indexed by (battery_bin, count_bin, action)."""

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray | None = None):
        if values is None:
            values = np.zeros((BATTERY_BINS, COUNT_BINS, N_ACTIONS), dtype=np.float32)
        values = np.ascontiguousarray(values, dtype=np.float32)
        if values.shape != (BATTERY_BINS, COUNT_BINS, N_ACTIONS):
            raise ValueError(f"bad Q-table shape {values.shape}")
        self.values = values

    @property
    def nbytes(self) -> int:
        return self.values.nbytes

    def copy(self) -> "QTable":
        return QTable(self.values.copy())

    def greedy(self, bins: tuple[int, int]) -> Decision:
        q = self.values[bins]
        # ties go to CONTINUE, the cheaper action
        return Decision.RETRAIN if q[1] > q[0] else Decision.CONTINUE

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(QTABLE_MAGIC, QTABLE_VERSION, BATTERY_BINS, COUNT_BINS,
                              N_ACTIONS, ENTRY_SIZE)
        return header + self.values.astype("<f4").tobytes(order="C")

    @classmethod
    def from_bytes(cls, blob: bytes) -> "QTable":
        if len(blob) != HEADER_BYTES + PAYLOAD_BYTES:
            raise QTableFormatError(f"Q-table blob must be {HEADER_BYTES + PAYLOAD_BYTES} bytes, got {len(blob)}")
        magic, version, nb, nc, na, size = _HEADER.unpack_from(blob)
        if magic != QTABLE_MAGIC:
            raise QTableFormatError(f"bad magic {magic!r}")
        if version != QTABLE_VERSION:
            raise QTableFormatError(f"unsupported Q-table version {version}")
        if (nb, nc, na, size) != (BATTERY_BINS, COUNT_BINS, N_ACTIONS, ENTRY_SIZE):
            raise QTableFormatError(f"unexpected layout {(nb, nc, na, size)}")
        values = np.frombuffer(blob, dtype="<f4", offset=HEADER_BYTES)
        return cls(values.reshape(BATTERY_BINS, COUNT_BINS, N_ACTIONS).astype(np.float32))

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "QTable":
        return cls.from_bytes(Path(path).read_bytes())

    def __eq__(self, other):
        return isinstance(other, QTable) and np.array_equal(self.values, other.values)


@dataclass
class QHyperparams:
    alpha: float = 0.2
    gamma: float = 0.95
    epsilon: float = 1.0
    alpha_decay: float = 0.995
    epsilon_decay: float = 0.99
    # >0 scales the step size by (1 + visits(s, a)) ** -visit_power
    visit_power: float = 0.0
    steps: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        for name in ("alpha_decay", "epsilon_decay"):
            if not 0.0 < getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not 0.0 <= self.visit_power <= 1.0:
            raise ValueError("visit_power must lie in [0, 1]")

    def step_size(self, visits: int) -> float:
        if self.visit_power == 0.0:
            return self.alpha
        return self.alpha / (1.0 + visits) ** self.visit_power

    def decay(self) -> None:
        """Advance one learning step: both rates shrink multiplicatively."""
        self.alpha *= self.alpha_decay
        self.epsilon *= self.epsilon_decay
        self.steps += 1


def discretize(state: NodeState) -> tuple[int, int]:
    battery_bin = min(math.floor(state.battery_fraction * BATTERY_BINS), BATTERY_BINS - 1)
    count_bin = min(state.n_classified // COUNT_BIN_WIDTH, COUNT_BINS - 1)
    return battery_bin, count_bin


def q_select(table: QTable, bins: tuple[int, int], epsilon: float,
             stream: RandomStream | None) -> Decision:
    """Epsilon-greedy action. With ``epsilon == 0`` no draws are taken."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0:
        if stream.uniform() < epsilon:
            return Decision(min(int(stream.uniform() * N_ACTIONS), N_ACTIONS - 1))
    return table.greedy(bins)


def q_update(table: QTable, s: tuple[int, int], a: int, r: float,
             s_next: tuple[int, int] | None, alpha: float, gamma: float) -> QTable:
    """In-place TD update of one entry; ``s_next=None`` marks a terminal
    transition (no bootstrap)."""
    q = table.values
    key = (s[0], s[1], int(a))
    future = 0.0 if s_next is None else float(q[s_next].max())
    current = float(q[key])
    q[key] = np.float32(current + alpha * (r + gamma * future - current))
    return table


class QLearningPolicy(Policy):
    """Q-table driven policy.

    With ``learning=False`` the table is read-only and actions are greedy.
    With ``learning=True`` each decision decays alpha/epsilon, picks an
    epsilon-greedy action and updates the previous state-action pair.
    """

    name = "autonomous"

    def __init__(self, table: QTable | None = None, hp: QHyperparams | None = None,
                 stream: RandomStream | None = None, learning: bool = False,
                 reward_kind: str = "relative", energy_table: EnergyTable | None = None,
                 anomaly_value: float | None = None):
        if reward_kind not in REWARDS:
            raise ValueError(f"unknown reward kind {reward_kind!r}")
        if learning and stream is None:
            raise ValueError("a learning policy needs an exploration stream")
        self.table = table if table is not None else QTable()
        self.hp = hp if hp is not None else QHyperparams()
        self.stream = stream
        self.learning = learning
        self.reward_kind = reward_kind
        self.energy_table = energy_table if energy_table is not None else EnergyTable()
        self.visited = np.zeros((BATTERY_BINS, COUNT_BINS), dtype=bool)
        self.updates = np.zeros((BATTERY_BINS, COUNT_BINS, N_ACTIONS), dtype=np.int64)
        # running cost per anomaly (uWh) used as the price in the relative reward
        self.anomaly_value = anomaly_value
        self.spent_total = 0
        self.anomalies_total = 0
        self._pending: tuple[tuple[int, int], int, float] | None = None

    def _learn(self, since_last, s_next):
        if self._pending is None or since_last is None:
            return
        s, a, alpha = self._pending
        t = self.energy_table
        self.spent_total += since_last.uploads * t.upload + since_last.train_energy
        self.anomalies_total += since_last.onboard + since_last.uploads
        r = step_reward(self.reward_kind, since_last, t, self.rho)
        q_update(self.table, s, a, r, s_next, alpha, self.hp.gamma)

    @property
    def rho(self) -> float:
        if self.anomaly_value is not None:
            return self.anomaly_value
        if self.anomalies_total == 0:
            return float(self.energy_table.upload)
        return self.spent_total / self.anomalies_total

    def decide(self, state, since_last=None):
        bins = discretize(state)
        self.visited[bins] = True
        if not self.learning:
            return self.table.greedy(bins)
        self._learn(since_last, bins)
        self.hp.decay()
        action = q_select(self.table, bins, self.hp.epsilon, self.stream)
        key = (bins[0], bins[1], int(action))
        self._pending = (bins, int(action), self.hp.step_size(int(self.updates[key])))
        self.updates[key] += 1
        return action

    def finish(self, since_last=None):
        if self.learning:
            self._learn(since_last, None)
        self._pending = None
