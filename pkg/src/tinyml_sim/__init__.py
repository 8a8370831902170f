"""Battery-life simulator for a TinyML anomaly-detection node comparing
static, dynamic and Q-learning retraining policies."""

from .core import Battery, EnergyTable, Exhausted, RandomStream, StreamId
from .engine import (Episode, SimConfig, SimResult, run_episode, run_iteration, run_sweep, train,
                     train_qtable)
from .policies import DynamicPolicy, QLearningPolicy, QTable, StaticPolicy
from .retrain import simulate_retrain

__all__ = [
    "Battery", "EnergyTable", "Exhausted", "RandomStream", "StreamId",
    "Episode", "SimConfig", "SimResult", "run_episode", "run_iteration", "run_sweep", "train",
    "train_qtable", "DynamicPolicy", "QLearningPolicy", "QTable", "StaticPolicy",
    "simulate_retrain",
]
