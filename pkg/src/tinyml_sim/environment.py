"""Anomaly sample stream, onboard classification budget and the emulated
cloud classifier."""

from __future__ import annotations

import enum

from .core import RandomStream

DEFAULT_RESET = 50


class SampleKind(enum.Enum):
    NORMAL = 0
    ANOMALY = 1


class Disposition(enum.Enum):
    ONBOARD = 0
    UNKNOWN = 1


class AnomalyStream:
    """Bernoulli(ratio) anomaly generator.

    One draw is taken per sample whatever the outcome, so two policies fed
    the same seed see the same sample sequence.
    """

    __slots__ = ("ratio", "stream")

    def __init__(self, ratio: float, stream: RandomStream):
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"anomaly ratio must lie in [0, 1], got {ratio}")
        self.ratio = ratio
        self.stream = stream

    def next_sample(self) -> SampleKind:
        return SampleKind.ANOMALY if self.stream.uniform() < self.ratio else SampleKind.NORMAL


def next_sample(env: AnomalyStream) -> SampleKind:
    return env.next_sample()


class ClassificationBudget:
    """Number of anomalies the onboard model can still identify.

    Starts empty at deployment; a successful retrain refills it.
    """

    __slots__ = ("remaining", "reset_value")

    def __init__(self, reset_value: int = DEFAULT_RESET, remaining: int = 0):
        if reset_value < 0:
            raise ValueError("reset_value must be non-negative")
        if not 0 <= remaining <= reset_value:
            raise ValueError("remaining must lie in [0, reset_value]")
        self.reset_value = reset_value
        self.remaining = remaining

    def classify_anomaly(self) -> Disposition:
        if self.remaining > 0:
            self.remaining -= 1
            return Disposition.ONBOARD
        return Disposition.UNKNOWN

    def reset(self) -> None:
        self.remaining = self.reset_value

    def __repr__(self):
        return f"ClassificationBudget(remaining={self.remaining}, reset_value={self.reset_value})"


def classify_anomaly(budget: ClassificationBudget) -> Disposition:
    return budget.classify_anomaly()


def server_classify(n_classified: int, cap: int | None = None) -> int:
    """Label an uploaded anomaly; returns the new dataset size.

    The emulated server never fails and each upload yields one training
    image. With ``cap`` set the stored dataset stops growing at ``cap``.
    """
    n = n_classified + 1
    if cap is not None and n > cap:
        return cap
    return n
