"""Pathwise domination of the state by a reflected radial process (scalar state)."""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pandas as pd

from ..model.spec import ProblemSpec
from .events import JumpEvent, SegmentEvent, StepEvent
from .observers import PathObserver
from .paths import simulate_forward

logger = logging.getLogger(__name__)

DOMINATION_TOL = 1e-8


def fit_growth_constant(spec: ProblemSpec, radius: float, nodes: int = 401, n_t: int = 11) -> float:
    """Smallest C with |a|, |sigma| <= C (1 + |x|) on [-radius, radius] x [0, T] samples."""
    xs = np.linspace(-radius, radius, nodes).reshape(-1, 1)
    scale = 1.0 + np.abs(xs[:, 0])
    best = 0.0
    for t in np.linspace(0.0, spec.horizon, n_t):
        a = np.abs(spec.drift_at(t, xs)[:, 0])
        sig = np.abs(spec.sigma_at(t, xs)[:, 0, 0])
        best = max(best, float(np.max(np.maximum(a, sig) / scale)))
    return best


@dataclass
class DominationTrace:
    """Per-path records of the dominating process at step times."""
    times: np.ndarray
    upsilon: np.ndarray       # (P, N + 1)
    theta: np.ndarray         # (P, N + 1), non-decreasing, starts at 0
    alpha: np.ndarray         # (P, N), control of each step's first segment
    floor: float

    @property
    def radius(self) -> np.ndarray:
        return np.sqrt(self.upsilon)

    def complementarity(self) -> float:
        """Sum over steps of (Upsilon - floor) * dTheta, worst path."""
        d_theta = np.diff(self.theta, axis=1)
        return float(np.max(np.sum((self.upsilon[:, 1:] - self.floor) * d_theta, axis=1)))


class DominationObserver(PathObserver):
    """
    Runs the reflected recursion for Upsilon on the simulator's own increments.

    Per Euler segment, with D = 4C + 2C^2 and alpha = X sigma / (2C (1 + Upsilon))
    clamped to [-1, 1]:

        Upsilon += D (1 + Upsilon) ds + 4C (1 + Upsilon) alpha dW
                   + (a ds + sigma dW)^2 - sigma^2 ds

    then Upsilon is reflected at zeta^2 v K_Gamma^2 and Theta collects the
    deficit. The last term is the discrete quadratic-variation defect of the
    Euler move; with it, Upsilon - X^2 never decreases while alpha is unclamped.
    """

    def __init__(self, spec: ProblemSpec, growth: float, tol: float = DOMINATION_TOL):
        """
        Initialize the observer.

        Args:
            spec: Problem instance (scalar state)
            growth: C_{a,sigma}
            tol: Allowed excess of |X| over R
        """
        self.spec = spec
        self.C = growth
        self.D = 4.0 * growth + 2.0 * growth ** 2
        self.tol = tol

    def on_start(self, t, x0, n_paths):
        self.floor = max(float(x0[0]) ** 2, self.spec.k_gamma ** 2)
        self.upsilon = np.full(n_paths, self.floor)
        self.theta = np.zeros(n_paths)
        self.first_violation = np.full(n_paths, np.nan)
        self.violation_x = np.full(n_paths, np.nan)
        self.violation_r = np.full(n_paths, np.nan)
        self.clamped = 0
        self.segments = 0
        self._alpha_step = np.zeros(n_paths)
        self._fresh = np.ones(n_paths, dtype=bool)
        self.upsilon_hist: List[np.ndarray] = [self.upsilon.copy()]
        self.theta_hist: List[np.ndarray] = [self.theta.copy()]
        self.alpha_hist: List[np.ndarray] = []
        self.times: List[float] = [t]
        self._check(np.arange(n_paths), t, np.full(n_paths, float(x0[0])))

    def _check(self, paths: np.ndarray, t, x: np.ndarray):
        bad = np.abs(x) > np.sqrt(self.upsilon[paths]) + self.tol
        bad &= np.isnan(self.first_violation[paths])
        if bad.any():
            idx = paths[bad]
            self.first_violation[idx] = np.broadcast_to(t, paths.shape)[bad]
            self.violation_x[idx] = x[bad]
            self.violation_r[idx] = np.sqrt(self.upsilon[idx])

    def on_segment(self, event: SegmentEvent):
        paths = event.paths
        ups = self.upsilon[paths]
        x = event.x0[:, 0]
        a = event.drift[:, 0]
        sig = event.sigma[:, 0, 0]
        dW = event.dW[:, 0]
        ds = event.dt
        if self.C > 0:
            raw = x * sig / (2.0 * self.C * (1.0 + ups))
        else:
            raw = np.zeros_like(x)
        alpha = np.clip(raw, -1.0, 1.0)
        self.clamped += int(np.sum(alpha != raw))
        self.segments += paths.size

        move = a * ds + sig * dW
        free = (ups + self.D * (1.0 + ups) * ds + 4.0 * self.C * (1.0 + ups) * alpha * dW
                + move ** 2 - sig ** 2 * ds)
        reflected = np.maximum(free, self.floor)
        self.theta[paths] += reflected - free
        self.upsilon[paths] = reflected

        fresh = self._fresh[paths]
        self._alpha_step[paths[fresh]] = alpha[fresh]
        self._fresh[paths] = False
        self._check(paths, event.t0 + ds, event.x1[:, 0])

    def on_jump(self, event: JumpEvent):
        self._check(event.paths, event.t, event.post[:, 0])

    def on_step(self, event: StepEvent):
        self.upsilon_hist.append(self.upsilon.copy())
        self.theta_hist.append(self.theta.copy())
        self.alpha_hist.append(self._alpha_step.copy())
        self._fresh[:] = True
        self.times.append(event.t)

    def trace(self) -> DominationTrace:
        return DominationTrace(
            times=np.asarray(self.times),
            upsilon=np.stack(self.upsilon_hist, axis=1),
            theta=np.stack(self.theta_hist, axis=1),
            alpha=np.stack(self.alpha_hist, axis=1),
            floor=self.floor,
        )

    @property
    def clamp_fraction(self) -> float:
        return self.clamped / self.segments if self.segments else 0.0


@dataclass
class DominationResult:
    """Summary of a domination run."""
    n_paths: int
    seed: int
    growth: float
    clamp_fraction: float
    complementarity: float
    failures: pd.DataFrame
    trace: DominationTrace

    @property
    def passed(self) -> bool:
        return self.failures.empty

    def summary(self) -> dict:
        return {"n_paths": self.n_paths, "seed": self.seed, "C": self.growth,
                "violations": len(self.failures), "clamp_fraction": self.clamp_fraction,
                "complementarity": self.complementarity}


def domination_check(spec: ProblemSpec, t: float, x: float, dt_sim: float, n_paths: int, seed: int,
                     growth: Optional[float] = None, fit_radius: Optional[float] = None,
                     verbose: bool = False) -> DominationResult:
    """
    Simulate X from (t, x) together with the reflected process and check
    |X_s| <= R_s = sqrt(Upsilon_s) at every recorded time of every path.

    Args:
        spec: Problem instance with d = 1
        t: Start time
        x: Start state
        dt_sim: Simulation step
        n_paths: Number of paths
        seed: Root seed
        growth: C_{a,sigma}; fitted on [-fit_radius, fit_radius] when omitted
        fit_radius: Fitting radius (default 10 max(1, |x|, K_Gamma))
        verbose: Show a progress bar

    Returns:
        DominationResult; ``failures`` has columns path, first_violation_time, X, R
    """
    if spec.dimension != 1:
        raise ValueError("domination_check supports scalar states only")
    x = float(np.asarray(x, dtype=float).reshape(-1)[0])
    if growth is None:
        radius = fit_radius or 10.0 * max(1.0, abs(x), spec.k_gamma)
        growth = fit_growth_constant(spec, radius)
    if growth < 0:
        raise ValueError("growth constant must be non-negative")

    observer = DominationObserver(spec, growth)
    simulate_forward(spec, t, x, dt_sim, n_paths, seed, observers=[observer], verbose=verbose)
    bad = np.flatnonzero(~np.isnan(observer.first_violation))
    failures = pd.DataFrame({
        "path": bad,
        "first_violation_time": observer.first_violation[bad],
        "X": observer.violation_x[bad],
        "R": observer.violation_r[bad],
    })
    trace = observer.trace()
    result = DominationResult(n_paths, seed, growth, observer.clamp_fraction,
                              trace.complementarity(), failures, trace)
    if not result.passed:
        logger.warning("domination failed on %d paths, first path %d", len(failures), int(bad[0]))
    logger.info("domination C=%.4g clamp_fraction=%.3g", growth, result.clamp_fraction)
    return result
