"""Stochastic model of on-device retraining.

Validation accuracy follows a sigmoid in ln(n_samples) with a penalty for
tiny datasets and a uniform jitter whose amplitude shrinks as 0.95**n.
Energy is linear in the number of images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import EnergyTable, RandomStream

VALIDATION_THRESHOLD = 0.85


class InvalidSampleCount(ValueError):
    pass


@dataclass(frozen=True)
class RetrainOutcome:
    v_accuracy: float
    e_consumed: int
    n_samples: int

    def succeeded(self, threshold: float = VALIDATION_THRESHOLD) -> bool:
        return self.v_accuracy >= threshold


def accuracy_center(n_samples: int) -> float:
    """Expected validation accuracy for ``n_samples`` images."""
    return 1.0 / (1.0 + math.exp(-0.6 * math.log(n_samples))) - 0.4 / n_samples


def accuracy_halfwidth(n_samples: int) -> float:
    return 0.1 * 0.95**n_samples


def validation_accuracy(n_samples: int, r: float) -> float:
    """Accuracy for a given uniform draw ``r``; clamped into [0, 1]."""
    offset = (2.0 * r - 1.0) / 10.0 * 0.95**n_samples
    result = accuracy_center(n_samples) - offset
    return min(1.0, max(0.0, result))


def simulate_retrain(n_samples: int, table: EnergyTable, stream: RandomStream) -> RetrainOutcome:
    if isinstance(n_samples, bool) or not isinstance(n_samples, int) or n_samples < 1:
        raise InvalidSampleCount(f"n_samples must be a positive integer, got {n_samples!r}")
    r = stream.uniform()
    return RetrainOutcome(
        v_accuracy=validation_accuracy(n_samples, r),
        e_consumed=table.train_per_image * n_samples,
        n_samples=n_samples,
    )
