"""Hourly sampling loop, energy ledger, episode lifecycle, Q-table training
and seed sweeps."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (DEFAULT_CAPACITY_UWH, MASK64, Battery, EnergyTable, Exhausted,
                   RandomStream, StreamId, check_energy, splitmix64)
from .environment import DEFAULT_RESET, ClassificationBudget, Disposition, SampleKind, server_classify
from .policies import (DEFAULT_N_CAP, REWARDS, Decision, DynamicPolicy, NodeState, Policy,
                       QHyperparams, QLearningPolicy, QTable, StaticPolicy, StepStats)
from .retrain import RetrainOutcome, simulate_retrain
from . import fasttrain

POLICIES = ("static", "dynamic", "autonomous")
LEDGER_FIELDS = ("sleep", "capture", "infer", "upload", "train")
COUNT_FIELDS = ("samples", "anomalies", "onboard", "uploads", "retrain_attempts", "retrain_successes")

_TRAIN_SALT = 0x7A3C_5E91_B2D4_F086


@dataclass(frozen=True)
class SimConfig:
    energy_table: EnergyTable = field(default_factory=EnergyTable)
    battery_capacity: int = DEFAULT_CAPACITY_UWH
    anomaly_ratio: float = 0.05
    classification_reset: int = DEFAULT_RESET
    sample_period_hours: float = 1.0
    policy: str = "static"
    static_threshold: int = 35
    dynamic_threshold: int = 10
    dynamic_min_threshold: int = 1
    dynamic_reduce_after: int = 5
    validation_threshold: float = 0.85
    n_cap: int = DEFAULT_N_CAP
    seed: int = 0
    online_learning: bool = False
    # Q-learning
    reward: str = "relative"
    # price of one handled anomaly in the relative reward; None = running
    # cost per anomaly observed during training
    anomaly_value_uwh: float | None = 900.0
    alpha: float = 1.0
    gamma: float = 0.95
    epsilon: float = 1.0
    alpha_decay: float = 1.0
    epsilon_decay: float = 0.9999997
    # per-entry step size alpha / (1 + visits) ** visit_power
    visit_power: float = 0.7
    train_episodes: int = 20000
    train_capacity_divisor: int = 1
    exploring_starts: bool = True
    train_start_max: int = 50
    qtable: QTable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        check_energy(self.battery_capacity, "battery_capacity")
        if not 0.0 <= self.anomaly_ratio <= 1.0:
            raise ValueError(f"anomaly_ratio must lie in [0, 1], got {self.anomaly_ratio}")
        if not self.sample_period_hours > 0:
            raise ValueError("sample_period_hours must be positive")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.reward not in REWARDS:
            raise ValueError(f"unknown reward {self.reward!r}; expected one of {REWARDS}")
        if self.classification_reset < 0:
            raise ValueError("classification_reset must be non-negative")
        if self.static_threshold < 1 or self.dynamic_threshold < 1 or self.dynamic_min_threshold < 1:
            raise ValueError("retrain thresholds must be at least 1")
        if self.n_cap < 1:
            raise ValueError("n_cap must be at least 1")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.train_episodes < 0 or self.train_capacity_divisor < 1:
            raise ValueError("bad training budget")
        self.hyperparams()  # range checks

    def hyperparams(self) -> QHyperparams:
        return QHyperparams(alpha=self.alpha, gamma=self.gamma, epsilon=self.epsilon,
                            alpha_decay=self.alpha_decay, epsilon_decay=self.epsilon_decay,
                            visit_power=self.visit_power)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class Ledger:
    sleep: int = 0
    capture: int = 0
    infer: int = 0
    upload: int = 0
    train: int = 0

    @property
    def total(self) -> int:
        return self.sleep + self.capture + self.infer + self.upload + self.train

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Counts:
    samples: int = 0
    anomalies: int = 0
    onboard: int = 0
    uploads: int = 0
    retrain_attempts: int = 0
    retrain_successes: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class RetrainEvent:
    iteration: int
    n_samples: int
    v_accuracy: float
    success: bool
    threshold: int | None
    train_uwh: int
    upload_uwh: int


@dataclass
class SimResult:
    policy: str
    anomaly_ratio: float
    seed: int
    iterations: int
    sample_period_hours: float
    capacity: int
    remaining: int
    ledger: Ledger
    counts: Counts
    trace: list[RetrainEvent] = field(default_factory=list)

    @property
    def battery_life_hours(self) -> float:
        return self.iterations * self.sample_period_hours

    def check(self) -> None:
        assert self.ledger.total == self.capacity - self.remaining
        assert self.counts.uploads <= self.counts.anomalies
        assert self.counts.retrain_successes <= self.counts.retrain_attempts


@dataclass(frozen=True)
class IterationOutcome:
    energy: int
    sample: SampleKind
    disposition: Disposition | None = None
    decision: Decision | None = None
    retrain: RetrainOutcome | None = None


class EpisodeEnd(Exception):
    """The battery could not fund the current iteration."""


def make_policy(config: SimConfig, exploration: RandomStream | None = None) -> Policy:
    if config.policy == "static":
        return StaticPolicy(config.static_threshold, config.validation_threshold)
    if config.policy == "dynamic":
        return DynamicPolicy(config.dynamic_threshold, config.validation_threshold,
                             config.dynamic_reduce_after, config.dynamic_min_threshold)
    if config.qtable is None:
        raise ValueError("autonomous policy needs a trained Q-table")
    learning = config.online_learning
    if learning and exploration is None:
        exploration = RandomStream(config.seed, StreamId.EXPLORATION)
    return QLearningPolicy(config.qtable.copy() if learning else config.qtable,
                           config.hyperparams(), exploration, learning=learning,
                           reward_kind=config.reward, energy_table=config.energy_table,
                           anomaly_value=config.anomaly_value_uwh)


class Episode:
    """Mutable world of a single deployment."""

    def __init__(self, config: SimConfig, policy: Policy | None = None,
                 env_stream: RandomStream | None = None,
                 retrain_stream: RandomStream | None = None, n_classified: int = 0,
                 remaining: int | None = None):
        self.config = config
        self.table = config.energy_table
        self.policy = policy if policy is not None else make_policy(config)
        self.battery = Battery(config.battery_capacity, remaining)
        self.budget = ClassificationBudget(config.classification_reset, 0)
        self.env_stream = env_stream or RandomStream(config.seed, StreamId.ENVIRONMENT)
        self.retrain_stream = retrain_stream or RandomStream(config.seed, StreamId.RETRAIN)
        self.ledger = Ledger()
        self.counts = Counts()
        self.since = StepStats()
        self.trace: list[RetrainEvent] = []
        self.n_classified = n_classified
        self.iterations = 0
        self.done = False
        self._base = self.table.per_iteration

    def _end(self) -> bool:
        self.done = True
        self.policy.finish(self.since)
        return False

    def _charge_base(self, k: int) -> None:
        t = self.table
        ledger = self.ledger
        ledger.sleep += k * t.sleep_per_iteration
        ledger.capture += k * t.image_capture
        ledger.infer += k * t.infer
        self.since.energy += k * self._base
        self.counts.samples += k

    def _anomaly(self) -> bool:
        self.counts.anomalies += 1
        budget = self.budget
        if budget.remaining > 0:
            budget.remaining -= 1
            self.counts.onboard += 1
            self.since.onboard += 1
            return True
        return self._upload_and_decide()

    def _complete(self, k: int) -> None:
        self.iterations += k
        self.since.iterations += k

    def step(self) -> bool:
        """One sampling iteration. Returns False once the battery is spent;
        an iteration cut short by exhaustion is not counted."""
        if self.done:
            return False
        try:
            self.battery.consume(self._base)
        except Exhausted:
            return self._end()
        self._charge_base(1)
        if self.env_stream.uniform() < self.config.anomaly_ratio:
            if not self._anomaly():
                return False
        self._complete(1)
        return True

    def run(self) -> "SimResult":
        """Run to exhaustion.

        Same trajectory as calling :meth:`step` repeatedly, but stretches of
        normal samples are charged in one go.
        """
        battery = self.battery
        base = self._base
        ratio = self.config.anomaly_ratio
        env = self.env_stream
        while not self.done:
            limit = battery.remaining // base
            if limit == 0:
                self._end()
                break
            k, hit = env.skip_until_below(ratio, limit)
            if k:
                battery.consume(k * base)
                self._charge_base(k)
                self._complete(k)
            if not hit:
                continue
            battery.consume(base)
            self._charge_base(1)
            if self._anomaly():
                self._complete(1)
        return self.result()

    def _upload_and_decide(self) -> bool:
        t = self.table
        cfg = self.config
        try:
            self.battery.consume(t.upload)
        except Exhausted:
            return self._end()
        self.ledger.upload += t.upload
        self.counts.uploads += 1
        self.since.uploads += 1
        self.since.energy += t.upload
        self.n_classified = server_classify(self.n_classified, cfg.n_cap)

        state = NodeState(self.battery.fraction, self.n_classified, True)
        decision = self.policy.decide(state, self.since)
        self.since.clear()
        self.last_decision = decision
        if decision != Decision.RETRAIN or self.n_classified < 1:
            return True

        outcome = simulate_retrain(self.n_classified, t, self.retrain_stream)
        self.last_retrain = outcome
        try:
            self.battery.consume(outcome.e_consumed)
        except Exhausted:
            return self._end()
        self.ledger.train += outcome.e_consumed
        self.since.energy += outcome.e_consumed
        self.since.train_energy += outcome.e_consumed
        self.counts.retrain_attempts += 1
        success = outcome.v_accuracy >= cfg.validation_threshold
        if success:
            self.counts.retrain_successes += 1
            self.n_classified = 0
            self.budget.reset()
        self.policy.observe_retrain(success)
        self.trace.append(RetrainEvent(
            iteration=self.iterations, n_samples=outcome.n_samples,
            v_accuracy=outcome.v_accuracy, success=success,
            threshold=getattr(self.policy, "threshold", None),
            train_uwh=self.ledger.train, upload_uwh=self.ledger.upload))
        return True

    def result(self) -> SimResult:
        cfg = self.config
        return SimResult(policy=cfg.policy, anomaly_ratio=cfg.anomaly_ratio, seed=cfg.seed,
                         iterations=self.iterations, sample_period_hours=cfg.sample_period_hours,
                         capacity=self.battery.capacity, remaining=self.battery.remaining,
                         ledger=dataclasses.replace(self.ledger),
                         counts=dataclasses.replace(self.counts), trace=list(self.trace))


def run_iteration(world: Episode) -> IterationOutcome:
    """Advance ``world`` by one iteration and describe what happened.

    Raises :class:`EpisodeEnd` when the battery runs out mid-iteration.
    """
    before = world.ledger.total
    anomalies, onboard = world.counts.anomalies, world.counts.onboard
    uploads, attempts = world.counts.uploads, world.counts.retrain_attempts
    world.last_decision = None
    world.last_retrain = None
    if not world.step():
        raise EpisodeEnd(f"battery exhausted after {world.iterations} iterations")
    sample = SampleKind.ANOMALY if world.counts.anomalies > anomalies else SampleKind.NORMAL
    disposition = None
    if sample is SampleKind.ANOMALY:
        disposition = Disposition.ONBOARD if world.counts.onboard > onboard else Disposition.UNKNOWN
    return IterationOutcome(
        energy=world.ledger.total - before, sample=sample, disposition=disposition,
        decision=world.last_decision if world.counts.uploads > uploads else None,
        retrain=world.last_retrain if world.counts.retrain_attempts > attempts else None)


def run_episode(config: SimConfig, policy: Policy | None = None) -> SimResult:
    return Episode(config, policy).run()


# --- Q-table training ------------------------------------------------------


@dataclass
class TrainingReport:
    table: QTable
    episodes: int
    steps: int
    alpha: float
    epsilon: float
    visited: np.ndarray

    @property
    def coverage(self) -> float:
        """Fraction of the 100 (battery, count) states visited."""
        return float(self.visited.mean())


def training_seed(seed: int, episode: int) -> int:
    _, out = splitmix64((seed ^ _TRAIN_SALT) + episode)
    return out


def train(config: SimConfig, episodes: int | None = None,
          hp: QHyperparams | None = None, jit: bool = True) -> TrainingReport:
    """Offline Q-table training over full episodes.

    Learning rate and exploration decay once per decision, carried across
    episodes. Each episode draws its environment from a seed derived from
    ``config.seed`` so evaluation seeds are never seen during training. With
    exploring starts every episode begins at a random count and charge.

    ``jit=True`` runs the compiled replica of this loop when numba is
    available; the result is bit-identical to ``jit=False``.
    """
    episodes = config.train_episodes if episodes is None else episodes
    if episodes < 0:
        raise ValueError("episodes must be non-negative")
    hp = hp if hp is not None else config.hyperparams()
    capacity = config.battery_capacity // config.train_capacity_divisor
    if jit and fasttrain.AVAILABLE:
        return _train_compiled(config, episodes, hp, capacity)
    policy = QLearningPolicy(QTable(), hp, RandomStream(config.seed, StreamId.EXPLORATION),
                             learning=True, reward_kind=config.reward,
                             energy_table=config.energy_table,
                             anomaly_value=config.anomaly_value_uwh)
    starts = policy.stream
    for e in range(episodes):
        cfg = config.replace(policy="autonomous", battery_capacity=capacity,
                             seed=training_seed(config.seed, e), qtable=policy.table)
        n0, remaining = 0, None
        if config.exploring_starts:
            n0 = int(starts.uniform() * config.train_start_max)
            remaining = capacity - int(starts.uniform() * capacity)
        Episode(cfg, policy, n_classified=n0, remaining=remaining).run()
    return TrainingReport(policy.table, episodes, hp.steps, hp.alpha, hp.epsilon,
                          policy.visited.copy())


def _train_compiled(config: SimConfig, episodes: int, hp: QHyperparams,
                    capacity: int) -> TrainingReport:
    ft = fasttrain
    t = config.energy_table
    table = QTable()
    updates = np.zeros(table.values.shape, dtype=np.int64)
    visited = np.zeros(table.values.shape[:2], dtype=bool)
    f = np.zeros(12)
    f[ft.ALPHA], f[ft.EPSILON] = hp.alpha, hp.epsilon
    f[ft.ALPHA_DECAY], f[ft.EPSILON_DECAY] = hp.alpha_decay, hp.epsilon_decay
    f[ft.VISIT_POWER], f[ft.GAMMA] = hp.visit_power, hp.gamma
    f[ft.RHO] = -1.0 if config.anomaly_value_uwh is None else config.anomaly_value_uwh
    f[ft.RATIO], f[ft.VALID] = config.anomaly_ratio, config.validation_threshold
    ip = np.zeros(10, dtype=np.int64)
    ip[ft.CAPACITY], ip[ft.BASE], ip[ft.UPLOAD] = capacity, t.per_iteration, t.upload
    ip[ft.TRAIN], ip[ft.RESET], ip[ft.N_CAP] = t.train_per_image, config.classification_reset, config.n_cap
    ip[ft.REWARD] = ft.REWARD_CODES[config.reward]
    ip[ft.EXPLORE], ip[ft.START_MAX] = int(config.exploring_starts), config.train_start_max
    ip[ft.STEPS] = hp.steps
    seeds = [training_seed(config.seed, e) for e in range(episodes)]
    env = np.array([ft.stream_state(s, StreamId.ENVIRONMENT) for s in seeds],
                   dtype=np.uint64).reshape(episodes, 4)
    rt = np.array([ft.stream_state(s, StreamId.RETRAIN) for s in seeds],
                  dtype=np.uint64).reshape(episodes, 4)
    explore = ft.stream_state(config.seed, StreamId.EXPLORATION)
    center, power = ft.retrain_tables(config.n_cap)
    ft.train_episodes(table.values, updates, visited, f, ip, explore, env, rt, center, power)
    hp.alpha, hp.epsilon, hp.steps = float(f[ft.ALPHA]), float(f[ft.EPSILON]), int(ip[ft.STEPS])
    return TrainingReport(table, episodes, hp.steps, hp.alpha, hp.epsilon, visited)


def train_qtable(config: SimConfig, episodes: int | None = None,
                 hp: QHyperparams | None = None) -> QTable:
    return train(config, episodes, hp).table


# --- sweeps -------------------------------------------------------------


def _run_cell(args) -> SimResult:
    config, seed = args
    return run_episode(config.replace(seed=seed))


def run_sweep(configs: list[SimConfig], seeds: list[int], workers: int = 1) -> list[SimResult]:
    """Every config against every seed, in (config, seed) order."""
    if not configs or not seeds:
        raise ValueError("run_sweep needs at least one config and one seed")
    for cfg in configs:
        if cfg.policy == "autonomous" and cfg.qtable is None:
            raise ValueError("autonomous configs need a trained Q-table")
    jobs = [(cfg, seed) for cfg in configs for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_cell, jobs, chunksize=4))
    return [_run_cell(job) for job in jobs]
