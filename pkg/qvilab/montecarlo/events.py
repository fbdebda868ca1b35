"""Events emitted by the forward simulator."""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class EventType(Enum):
    """Types of simulator events."""
    SEGMENT = "segment"
    JUMP = "jump"
    STEP = "step"


@dataclass
class Event:
    """Base class for all simulator events; ``paths`` indexes the affected paths."""
    event_type: EventType
    step: int
    paths: np.ndarray


@dataclass
class SegmentEvent(Event):
    """
    One Euler move of a group of paths between two event times.

    Arrays are indexed like ``paths``: t0 and dt are (m,), x0, x1, dW and
    drift are (m, d), sigma is (m, d, d). Coefficients are frozen at (t0, x0).
    """
    t0: np.ndarray
    dt: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    dW: np.ndarray
    drift: np.ndarray
    sigma: np.ndarray

    def __init__(self, step, paths, t0, dt, x0, x1, dW, drift, sigma):
        super().__init__(event_type=EventType.SEGMENT, step=step, paths=paths)
        self.t0 = t0
        self.dt = dt
        self.x0 = x0
        self.x1 = x1
        self.dW = dW
        self.drift = drift
        self.sigma = sigma


@dataclass
class JumpEvent(Event):
    """Impulses applied to a group of paths: post = pre + gamma(t, pre, mark)."""
    t: np.ndarray
    mark: np.ndarray
    pre: np.ndarray
    post: np.ndarray

    def __init__(self, step, paths, t, mark, pre, post):
        super().__init__(event_type=EventType.JUMP, step=step, paths=paths)
        self.t = t
        self.mark = mark
        self.pre = pre
        self.post = post


@dataclass
class StepEvent(Event):
    """All paths reached step time t; x is (P, d)."""
    t: float
    x: np.ndarray

    def __init__(self, step, paths, t, x):
        super().__init__(event_type=EventType.STEP, step=step, paths=paths)
        self.t = t
        self.x = x
