"""Problem instances: coefficients, mark space, structural constants and drivers."""

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np

from ..core.types import DriverMode

if TYPE_CHECKING:
    from ..operators.grid import ValueField

ArrayLike = Union[float, np.ndarray]
TimeLike = Union[float, np.ndarray]


def as_points(x: ArrayLike, dimension: int) -> np.ndarray:
    """Reshape states to an (m, d) float array."""
    arr = np.asarray(x, dtype=float)
    return arr.reshape(-1, dimension)


def _as_time(t: TimeLike, m: int) -> TimeLike:
    if np.ndim(t) == 0:
        return float(t)
    return np.asarray(t, dtype=float).reshape(m)


def _scalar_values(out, m: int) -> np.ndarray:
    arr = np.asarray(out, dtype=float)
    if arr.size == 1:
        return np.full(m, float(arr.reshape(-1)[0]))
    return np.array(arr.reshape(m), dtype=float)


def _vector_values(out, m: int, d: int) -> np.ndarray:
    arr = np.asarray(out, dtype=float)
    if d == 1:
        if arr.size == 1:
            return np.full((m, 1), float(arr.reshape(-1)[0]))
        return np.array(arr.reshape(m, 1), dtype=float)
    return np.array(np.broadcast_to(arr, (m, d)), dtype=float)


def _matrix_values(out, m: int, d: int) -> np.ndarray:
    arr = np.asarray(out, dtype=float)
    if d == 1:
        if arr.size == 1:
            return np.full((m, 1, 1), float(arr.reshape(-1)[0]))
        return np.array(arr.reshape(m, 1, 1), dtype=float)
    return np.array(np.broadcast_to(arr, (m, d, d)), dtype=float)


@dataclass(frozen=True, eq=False)
class MarkSpace:
    """Finite quadrature of the mark set E with intensity weights."""
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim == 1:
            nodes = nodes.reshape(-1, 1)
        weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if nodes.shape[0] == 0:
            raise ValueError("MarkSpace needs at least one node")
        if weights.shape[0] != nodes.shape[0]:
            raise ValueError("MarkSpace nodes and weights differ in length")
        if not np.all(weights > 0) or not np.all(np.isfinite(weights)):
            raise ValueError("MarkSpace weights must be finite and strictly positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def dimension(self) -> int:
        return self.nodes.shape[1]

    @property
    def total(self) -> float:
        """lambda(E), the total jump intensity."""
        return float(np.sum(self.weights))

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.total


@dataclass(frozen=True)
class CoefficientSet:
    """
    Evaluable model coefficients.

    Every callable receives states as an (m, d) array and marks as an (m, d)
    array; time is a float or an (m,) array. Outputs may be anything that
    broadcasts to the documented shape.
    """
    drift: Callable          # a(t, x) -> (m, d)
    diffusion: Callable      # sigma(t, x) -> (m, d, d)
    jump: Callable           # gamma(t, x, e) -> (m, d)
    cost: Callable           # chi(t, x, e) -> (m,)
    obstacle: Callable       # h(t, x) -> (m,)
    terminal: Callable       # psi(x) -> (m,)


@dataclass(frozen=True)
class LipschitzConstants:
    """Declared Lipschitz constants k_f, k_gamma and k_{a,sigma}."""
    k_f: float = 0.0
    k_gamma: float = 0.0
    k_a_sigma: float = 0.0

    def __post_init__(self):
        for name in ("k_f", "k_gamma", "k_a_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A complete double-obstacle QVI instance on [0, T] x R^d."""
    horizon: float
    dimension: int
    coefficients: CoefficientSet
    marks: MarkSpace
    k_gamma: float
    growth_rho: float = 2.0
    lipschitz: LipschitzConstants = field(default_factory=LipschitzConstants)
    loop_delta1: float = 0.1
    loop_delta2: float = 0.1
    name: str = "model"

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.k_gamma <= 0:
            raise ValueError("k_gamma must be positive")
        if self.loop_delta1 <= 0 or self.loop_delta2 <= 0:
            raise ValueError("loop_delta1 and loop_delta2 must be positive")
        if self.growth_rho < 0:
            raise ValueError("growth_rho must be non-negative")
        if self.marks.dimension != self.dimension:
            raise ValueError(
                f"mark dimension {self.marks.dimension} does not match state dimension {self.dimension}"
            )

    # Normalized evaluators

    def points(self, x: ArrayLike) -> np.ndarray:
        return as_points(x, self.dimension)

    def drift_at(self, t: TimeLike, x: ArrayLike) -> np.ndarray:
        x = self.points(x)
        m = x.shape[0]
        return _vector_values(self.coefficients.drift(_as_time(t, m), x), m, self.dimension)

    def sigma_at(self, t: TimeLike, x: ArrayLike) -> np.ndarray:
        x = self.points(x)
        m = x.shape[0]
        return _matrix_values(self.coefficients.diffusion(_as_time(t, m), x), m, self.dimension)

    def _marks_for(self, e: ArrayLike, m: int) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        if e.ndim <= 1:
            e = np.broadcast_to(e.reshape(1, self.dimension), (m, self.dimension))
        return np.array(e.reshape(m, self.dimension), dtype=float)

    def jump_at(self, t: TimeLike, x: ArrayLike, e: ArrayLike) -> np.ndarray:
        x = self.points(x)
        m = x.shape[0]
        out = self.coefficients.jump(_as_time(t, m), x, self._marks_for(e, m))
        return _vector_values(out, m, self.dimension)

    def cost_at(self, t: TimeLike, x: ArrayLike, e: ArrayLike) -> np.ndarray:
        x = self.points(x)
        m = x.shape[0]
        return _scalar_values(self.coefficients.cost(_as_time(t, m), x, self._marks_for(e, m)), m)

    def obstacle_at(self, t: TimeLike, x: ArrayLike) -> np.ndarray:
        x = self.points(x)
        m = x.shape[0]
        return _scalar_values(self.coefficients.obstacle(_as_time(t, m), x), m)

    def terminal_at(self, x: ArrayLike) -> np.ndarray:
        x = self.points(x)
        return _scalar_values(self.coefficients.terminal(x), x.shape[0])

    def payoff_at(self, t: TimeLike, x: ArrayLike) -> np.ndarray:
        """Combined payoff: h(t, x) before the horizon, psi(x) at it."""
        x = self.points(x)
        m = x.shape[0]
        if np.ndim(t) == 0:
            if t >= self.horizon:
                return self.terminal_at(x)
            return self.obstacle_at(t, x)
        t = np.asarray(t, dtype=float).reshape(m)
        return np.where(t >= self.horizon, self.terminal_at(x), self.obstacle_at(t, x))


@dataclass(frozen=True, eq=False)
class DriverSpec:
    """
    Local driver f~(t, x, y, z) together with its non-local composition mode.

    In LOCAL_PLUS_K_M mode the full driver is f~(t, x, g(x), z) + k * (Mg)(t, x).
    FROZEN mode reads the M-term from a fixed field g at the running time index,
    which makes the driver local.
    """
    f_tilde: Callable
    mode: DriverMode = DriverMode.LOCAL
    k: float = 0.0
    frozen: Optional["ValueField"] = None

    def __post_init__(self):
        if self.mode is DriverMode.FROZEN and self.frozen is None:
            raise ValueError("FROZEN driver needs a frozen field")
        if self.mode is not DriverMode.FROZEN and self.frozen is not None:
            raise ValueError("only FROZEN drivers carry a frozen field")

    @classmethod
    def local(cls, f_tilde: Callable) -> "DriverSpec":
        return cls(f_tilde=f_tilde, mode=DriverMode.LOCAL)

    @classmethod
    def local_plus_k_m(cls, f_tilde: Callable, k: float) -> "DriverSpec":
        return cls(f_tilde=f_tilde, mode=DriverMode.LOCAL_PLUS_K_M, k=k)

    def frozen_at(self, field: "ValueField") -> "DriverSpec":
        """Freeze the non-local term at ``field`` (keeps f~ and k)."""
        return DriverSpec(f_tilde=self.f_tilde, mode=DriverMode.FROZEN, k=self.k, frozen=field)

    @property
    def is_local(self) -> bool:
        return self.mode in (DriverMode.LOCAL, DriverMode.FROZEN)

    def local_values(self, t: TimeLike, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Evaluate f~ on (m,) values y and (m, d) values z."""
        m = x.shape[0]
        y = np.asarray(y, dtype=float).reshape(m)
        z = np.asarray(z, dtype=float).reshape(m, -1)
        return _scalar_values(self.f_tilde(_as_time(t, m), x, y, z), m)


def constant(value: float) -> Callable:
    """Coefficient that ignores its arguments."""
    def _const(*args):
        return value
    return _const
