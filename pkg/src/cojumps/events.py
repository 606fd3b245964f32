"""Event series shared by detection, Hawkes estimation, tests and the factor model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EventSeries:
    """Strictly increasing event times of one process.

    Times are integer minutes in ``[1, N]`` when produced by the detection
    pipeline; simulators may hand out real-valued times before discretization.
    """

    symbol: str
    times: np.ndarray
    directions: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times)
        if self.times.ndim != 1:
            raise ValueError("event times must be one-dimensional")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError(f"{self.symbol}: event times must be strictly increasing")
        if self.directions is not None:
            self.directions = np.asarray(self.directions, dtype=np.int8)
            if self.directions.shape != self.times.shape:
                raise ValueError("directions must align with times")

    def __len__(self):
        return int(self.times.size)

    def within(self, n: int) -> bool:
        return self.times.size == 0 or (self.times[0] >= 1 and self.times[-1] <= n)


def discretize(times, horizon: int | None = None) -> np.ndarray:
    """Map continuous event times to integer minutes, minute ``m`` covering ``(m-1, m]``.

    Several events falling in the same minute collapse into one.
    """
    t = np.ceil(np.asarray(times, dtype=float)).astype(np.int64)
    t[t < 1] = 1
    if horizon is not None:
        t = t[t <= horizon]
    return np.unique(t)
