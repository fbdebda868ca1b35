"""Sampled checks of the structural assumptions on a ProblemSpec."""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..core.errors import LoopBudgetError
from ..core.settings import get_settings
from ..core.types import CheckStatus
from .spec import ProblemSpec, as_points

logger = logging.getLogger(__name__)

RTOL = 1e-9


def _slack(*values: np.ndarray) -> np.ndarray:
    """Relative tolerance band for a floating-point inequality."""
    scale = np.ones_like(np.asarray(values[0], dtype=float))
    for v in values:
        scale = np.maximum(scale, np.abs(v))
    return RTOL * scale


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one named check."""
    name: str
    status: CheckStatus
    witness: Optional[dict] = None
    measured: Dict[str, float] = field(default_factory=dict)
    tolerance: float = RTOL
    margin: float = 0.0
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.status is CheckStatus.PASS

    def merge(self, other: "CheckResult") -> "CheckResult":
        if other.name != self.name:
            raise ValueError("can only merge results of the same check")
        # worse status wins, then the larger violation, then a fixed textual order
        key_self = (self.status.severity, self.margin, repr(self.witness))
        key_other = (other.status.severity, other.margin, repr(other.witness))
        lead = self if key_self >= key_other else other
        measured = dict(self.measured)
        for key, value in other.measured.items():
            measured[key] = max(measured[key], value) if key in measured else value
        return replace(lead, measured=measured, tolerance=max(self.tolerance, other.tolerance))


@dataclass(frozen=True)
class ValidationReport:
    """Named check results; merging is associative and commutative."""
    checks: Dict[str, CheckResult] = field(default_factory=dict)

    @classmethod
    def of(cls, results: Sequence[CheckResult]) -> "ValidationReport":
        report = cls()
        for result in results:
            report = report.merge(cls({result.name: result}))
        return report

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> List[CheckResult]:
        return [self.checks[k] for k in sorted(self.checks) if not self.checks[k].passed]

    def __getitem__(self, name: str) -> CheckResult:
        return self.checks[name]

    def merge(self, other: "ValidationReport") -> "ValidationReport":
        merged = dict(self.checks)
        for name, result in other.checks.items():
            merged[name] = merged[name].merge(result) if name in merged else result
        return ValidationReport({k: merged[k] for k in sorted(merged)})

    def to_text(self) -> str:
        """Serialize as ``key = value`` lines."""
        lines = [f"passed = {str(self.passed).lower()}"]
        for name in sorted(self.checks):
            check = self.checks[name]
            lines.append(f"{name}.status = {check.status.value}")
            lines.append(f"{name}.tolerance = {check.tolerance:.17g}")
            for key in sorted(check.measured):
                lines.append(f"{name}.{key} = {check.measured[key]:.17g}")
            if check.witness is not None:
                lines.append(f"{name}.witness = {_witness_text(check.witness)}")
            if check.message:
                lines.append(f"{name}.message = {check.message}")
        return "\n".join(lines) + "\n"

    def witness_frame(self) -> pd.DataFrame:
        rows = [
            {
                "check": c.name,
                "status": c.status.value,
                "margin": c.margin,
                "witness": _witness_text(c.witness),
            }
            for c in self.failures()
        ]
        return pd.DataFrame(rows, columns=["check", "status", "margin", "witness"])


def _witness_text(witness: Optional[dict]) -> str:
    if witness is None:
        return ""
    parts = []
    for key in sorted(witness):
        value = witness[key]
        if isinstance(value, (list, tuple, np.ndarray)):
            value = "[" + " ".join(_fmt(v) for v in np.ravel(np.asarray(value, dtype=object))) + "]"
        else:
            value = _fmt(value)
        parts.append(f"{key}={value}")
    return ";".join(parts)


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


# Sample clouds


@dataclass(frozen=True, eq=False)
class SamplePoints:
    """A cloud of (t, x) samples; checks range over every mark at each sample."""
    t: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        x = np.asarray(self.x, dtype=float)
        x = x.reshape(t.shape[0], -1)
        if t.shape[0] == 0:
            raise ValueError("samples must be non-empty")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)

    @property
    def size(self) -> int:
        return self.t.shape[0]

    def __getitem__(self, idx) -> "SamplePoints":
        idx = np.atleast_1d(idx)
        return SamplePoints(self.t[idx], self.x[idx])

    @classmethod
    def cloud(cls, spec: ProblemSpec, radius: float, n_t: int = 3, n_x: int = 9) -> "SamplePoints":
        """Tensor cloud over [0, T] x [-radius, radius]^d."""
        times = np.linspace(0.0, spec.horizon, n_t)
        axis = np.linspace(-radius, radius, n_x)
        mesh = np.stack(np.meshgrid(*([axis] * spec.dimension), indexing="ij"), axis=-1)
        xs = mesh.reshape(-1, spec.dimension)
        t = np.repeat(times, xs.shape[0])
        x = np.tile(xs, (n_t, 1))
        return cls(t, x)


@dataclass(frozen=True, eq=False)
class LipschitzPairs:
    """Point pairs for difference quotients in x and in (y, z)."""
    t: np.ndarray
    x: np.ndarray
    x_alt: np.ndarray
    y: np.ndarray
    y_alt: np.ndarray
    z: np.ndarray
    z_alt: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        m = t.shape[0]
        object.__setattr__(self, "t", t)
        for name in ("x", "x_alt", "z", "z_alt"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(m, -1))
        for name in ("y", "y_alt"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(m))

    @classmethod
    def cloud(cls, spec: ProblemSpec, radius: float, count: int = 400, seed: int = 0) -> "LipschitzPairs":
        """Random near and far pairs inside the box (deterministic per seed)."""
        rng = np.random.default_rng(seed)
        d = spec.dimension
        t = rng.uniform(0.0, spec.horizon, count)
        x = rng.uniform(-radius, radius, (count, d))
        step = np.where(np.arange(count)[:, None] % 2 == 0, 1e-3 * radius, radius)
        x_alt = np.clip(x + step * rng.uniform(-1.0, 1.0, (count, d)), -radius, radius)
        y = rng.uniform(-radius, radius, count)
        y_alt = rng.uniform(-radius, radius, count)
        z = rng.uniform(-radius, radius, (count, d))
        z_alt = rng.uniform(-radius, radius, (count, d))
        return cls(t, x, x_alt, y, y_alt, z, z_alt)


# Evaluation with witnesses


class _SampleFailure(Exception):
    def __init__(self, index: int, message: str):
        super().__init__(message)
        self.index = index


def _evaluate(fn: Callable[[np.ndarray], np.ndarray], m: int) -> np.ndarray:
    """Evaluate ``fn`` on all sample indices; locate the first bad sample on failure."""
    try:
        out = np.asarray(fn(np.arange(m)), dtype=float)
        if np.all(np.isfinite(out)):
            return out
    except Exception:  # noqa: BLE001 - reported per sample below
        pass
    for i in range(m):
        try:
            value = np.asarray(fn(np.array([i])), dtype=float)
        except Exception as exc:  # noqa: BLE001
            raise _SampleFailure(i, f"evaluation failed: {exc}")
        if not np.all(np.isfinite(value)):
            raise _SampleFailure(i, "non-finite value")
    raise _SampleFailure(0, "evaluation failed on the batch but not per sample")


def _sample_witness(samples: SamplePoints, index: int, mark: Optional[np.ndarray] = None) -> dict:
    witness = {"t": float(samples.t[index]), "x": samples.x[index].tolist()}
    if mark is not None:
        witness["e"] = np.asarray(mark).tolist()
    return witness


def _error_result(name: str, samples: SamplePoints, failure: _SampleFailure, mark=None) -> CheckResult:
    return CheckResult(
        name=name,
        status=CheckStatus.ERROR,
        witness=_sample_witness(samples, failure.index, mark),
        message=str(failure),
    )


def _inequality_result(name: str, lhs: np.ndarray, rhs: np.ndarray, witness_of: Callable[[int], dict],
                       measured: Optional[Dict[str, float]] = None) -> CheckResult:
    """Check lhs <= rhs elementwise with the relative tolerance band."""
    excess = lhs - rhs - _slack(lhs, rhs)
    worst = int(np.argmax(excess))
    measured = dict(measured or {})
    measured["max_excess"] = float(np.max(lhs - rhs))
    if excess[worst] > 0:
        witness = witness_of(worst)
        witness["lhs"] = float(lhs[worst])
        witness["rhs"] = float(rhs[worst])
        return CheckResult(name, CheckStatus.FAIL, witness, measured, RTOL, float(lhs[worst] - rhs[worst]))
    return CheckResult(name, CheckStatus.PASS, None, measured, RTOL)


def _per_mark(spec: ProblemSpec, samples: SamplePoints):
    """Flatten samples x marks into index arrays (sample index, mark index)."""
    k = spec.marks.size
    sample_idx = np.repeat(np.arange(samples.size), k)
    mark_idx = np.tile(np.arange(k), samples.size)
    return sample_idx, mark_idx


def _check_cost(spec: ProblemSpec, samples: SamplePoints) -> CheckResult:
    name = "cost_nonnegative"
    s_idx, k_idx = _per_mark(spec, samples)
    nodes = spec.marks.nodes
    try:
        chi = _evaluate(
            lambda i: spec.cost_at(samples.t[s_idx[i]], samples.x[s_idx[i]], nodes[k_idx[i]]), len(s_idx)
        )
    except _SampleFailure as failure:
        return _error_result(name, samples, _SampleFailure(int(s_idx[failure.index]), str(failure)),
                             nodes[k_idx[failure.index]])
    return _inequality_result(
        name, -chi, np.zeros_like(chi),
        lambda j: _sample_witness(samples, int(s_idx[j]), nodes[k_idx[j]]),
        {"min_cost": float(np.min(chi))},
    )


def _check_impulse_bound(spec: ProblemSpec, samples: SamplePoints) -> CheckResult:
    name = "impulse_bound"
    s_idx, k_idx = _per_mark(spec, samples)
    nodes = spec.marks.nodes
    x = samples.x[s_idx]
    try:
        gamma = _evaluate(lambda i: spec.jump_at(samples.t[s_idx[i]], x[i], nodes[k_idx[i]]), len(s_idx))
    except _SampleFailure as failure:
        return _error_result(name, samples, _SampleFailure(int(s_idx[failure.index]), str(failure)),
                             nodes[k_idx[failure.index]])
    gamma = gamma.reshape(len(s_idx), spec.dimension)
    lhs = np.linalg.norm(x + gamma, axis=1)
    rhs = np.maximum(spec.k_gamma, np.linalg.norm(x, axis=1))
    return _inequality_result(
        name, lhs, rhs, lambda j: _sample_witness(samples, int(s_idx[j]), nodes[k_idx[j]])
    )


def _check_terminal(spec: ProblemSpec, samples: SamplePoints) -> List[CheckResult]:
    T = spec.horizon
    s_idx, k_idx = _per_mark(spec, samples)
    nodes = spec.marks.nodes
    results = []
    try:
        h_T = _evaluate(lambda i: spec.obstacle_at(T, samples.x[i]), samples.size)
        psi = _evaluate(lambda i: spec.terminal_at(samples.x[i]), samples.size)
    except _SampleFailure as failure:
        return [_error_result("terminal_obstacle", samples, failure)]
    results.append(_inequality_result(
        "terminal_obstacle", h_T, psi, lambda j: _sample_witness(samples, j)
    ))
    x = samples.x[s_idx]
    try:
        after = _evaluate(
            lambda i: spec.terminal_at(x[i] + spec.jump_at(T, x[i], nodes[k_idx[i]]))
            + spec.cost_at(T, x[i], nodes[k_idx[i]]),
            len(s_idx),
        )
    except _SampleFailure as failure:
        results.append(_error_result("terminal_consistency", samples,
                                     _SampleFailure(int(s_idx[failure.index]), str(failure)),
                                     nodes[k_idx[failure.index]]))
        return results
    results.append(_inequality_result(
        "terminal_consistency", psi[s_idx], after,
        lambda j: _sample_witness(samples, int(s_idx[j]), nodes[k_idx[j]]),
    ))
    return results


def _growth_result(name: str, values: np.ndarray, x_norm: np.ndarray, rho: float,
                   slack: float, witness_of: Callable[[int], dict]) -> CheckResult:
    """
    Fit the growth constant and the empirical growth exponent.

    The constant is the smallest C with |g| <= C (1 + |x|^rho) on the samples.
    The exponent is the least-squares slope of log(1 + |g|) against
    log(1 + |x|^rho) on samples with |x| >= 1; a slope above 1 + slack means
    the samples grow faster than the declared exponent.
    """
    weight = 1.0 + x_norm ** rho
    ratio = np.abs(values) / weight
    measured = {"C": float(np.max(ratio))}
    outer = x_norm >= 1.0
    regressor = np.log1p(x_norm[outer] ** rho)
    if rho > 0 and np.unique(regressor).size >= 2:
        response = np.log1p(np.abs(values[outer]))
        slope = float(np.polyfit(regressor, response, 1)[0])
        measured["slope"] = slope
        if slope > 1.0 + slack:
            worst = int(np.flatnonzero(outer)[np.argmax(ratio[outer])])
            witness = witness_of(worst)
            witness["value"] = float(values[worst])
            return CheckResult(name, CheckStatus.FAIL, witness, measured, slack, slope - 1.0,
                               f"samples grow like |x|^{slope * rho:.3g}, declared rho = {rho:g}")
    return CheckResult(name, CheckStatus.PASS, None, measured, slack)


def _check_growth(spec: ProblemSpec, samples: SamplePoints, slack: float) -> List[CheckResult]:
    rho = spec.growth_rho
    x_norm = np.linalg.norm(samples.x, axis=1)
    results = []
    targets = {
        "growth_h": lambda i: spec.obstacle_at(samples.t[i], samples.x[i]),
        "growth_psi": lambda i: spec.terminal_at(samples.x[i]),
    }
    for name, fn in targets.items():
        try:
            values = _evaluate(fn, samples.size)
        except _SampleFailure as failure:
            results.append(_error_result(name, samples, failure))
            continue
        results.append(_growth_result(name, values, x_norm, rho, slack, lambda j: _sample_witness(samples, j)))

    s_idx, k_idx = _per_mark(spec, samples)
    nodes = spec.marks.nodes
    try:
        chi = _evaluate(
            lambda i: spec.cost_at(samples.t[s_idx[i]], samples.x[s_idx[i]], nodes[k_idx[i]]), len(s_idx)
        )
    except _SampleFailure as failure:
        results.append(_error_result("growth_chi", samples,
                                     _SampleFailure(int(s_idx[failure.index]), str(failure)),
                                     nodes[k_idx[failure.index]]))
    else:
        results.append(_growth_result(
            "growth_chi", chi, x_norm[s_idx], rho, slack,
            lambda j: _sample_witness(samples, int(s_idx[j]), nodes[k_idx[j]]),
        ))
    return results


def _check_driver_growth(spec: ProblemSpec, driver, samples: SamplePoints, slack: float) -> CheckResult:
    name = "growth_f"
    x_norm = np.linalg.norm(samples.x, axis=1)
    try:
        values = _evaluate(
            lambda i: driver.local_values(
                samples.t[i], samples.x[i], np.zeros(len(i)), np.zeros((len(i), spec.dimension))
            ),
            samples.size,
        )
    except _SampleFailure as failure:
        return _error_result(name, samples, failure)
    return _growth_result(name, values, x_norm, spec.growth_rho, slack, lambda j: _sample_witness(samples, j))


def validate_static(spec: ProblemSpec, samples: SamplePoints, driver=None,
                    growth_slack: float = 0.25) -> ValidationReport:
    """
    Check the pointwise assumptions on every sample.

    Covers non-negative costs, the impulse bound |x + gamma| <= max(K_Gamma, |x|),
    terminal consistency h(T, x) <= psi(x) <= psi(x + gamma(T, x, e)) + chi(T, x, e),
    and polynomial growth of f~(t, x, 0, 0), h, psi and chi with fitted constants.

    Args:
        spec: Problem instance
        samples: Non-empty (t, x) cloud; every mark node is checked at each sample
        driver: Optional DriverSpec whose f~ is included in the growth checks
        growth_slack: Allowed excess of the fitted growth slope

    Returns:
        ValidationReport with one entry per check
    """
    if samples.size == 0:
        raise ValueError("samples must be non-empty")
    results = [_check_cost(spec, samples), _check_impulse_bound(spec, samples)]
    results.extend(_check_terminal(spec, samples))
    results.extend(_check_growth(spec, samples, growth_slack))
    if driver is not None:
        results.append(_check_driver_growth(spec, driver, samples, growth_slack))
    report = ValidationReport.of(results)
    logger.info("validate_static model=%s samples=%d passed=%s", spec.name, samples.size, report.passed)
    return report


def check_no_free_loop(spec: ProblemSpec, t: float, starts, max_depth: int,
                       budget: Optional[int] = None) -> ValidationReport:
    """
    Enumerate every impulse chain up to ``max_depth`` and look for cheap loops.

    A chain x_j = x_{j-1} + gamma(t, x_{j-1}, e_{j-1}) that returns to within
    loop_delta1 of its start must have accumulated cost at least loop_delta2.
    The cheapest violating chain (then the shortest, then the first in mark
    order) is the witness.

    Args:
        spec: Problem instance
        t: Time at which chains are formed
        starts: Start states, shape (m, d)
        max_depth: Longest chain length
        budget: Cap on mark_count ** max_depth (default from settings)

    Returns:
        ValidationReport holding the ``no_free_loop`` check

    Raises:
        LoopBudgetError: if the enumeration would exceed the budget
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    budget = get_settings().loop_budget if budget is None else budget
    k = spec.marks.size
    chains = k ** max_depth
    if chains > budget:
        raise LoopBudgetError(
            f"{k} marks to depth {max_depth} gives {chains} chains per start, budget is {budget}",
            chains, budget,
        )

    starts = as_points(starts, spec.dimension)
    nodes = spec.marks.nodes
    delta1, delta2 = spec.loop_delta1, spec.loop_delta2
    return_band = delta1 + RTOL * max(1.0, delta1)
    cost_floor = delta2 - RTOL * max(1.0, delta2)

    states = starts.copy()
    origin = np.arange(starts.shape[0])
    costs = np.zeros(starts.shape[0])
    paths = np.zeros((starts.shape[0], 0), dtype=int)
    enumerated = 0
    returning = 0
    min_cost = np.inf
    best = None

    for depth in range(1, max_depth + 1):
        states_rep = np.repeat(states, k, axis=0)
        mark_idx = np.tile(np.arange(k), states.shape[0])
        marks = nodes[mark_idx]
        try:
            step = spec.jump_at(t, states_rep, marks)
            cost = spec.cost_at(t, states_rep, marks)
        except Exception as exc:  # noqa: BLE001
            return ValidationReport.of([CheckResult(
                "no_free_loop", CheckStatus.ERROR, {"t": float(t), "depth": depth}, message=str(exc)
            )])
        states = states_rep + step
        costs = np.repeat(costs, k) + cost
        origin = np.repeat(origin, k)
        paths = np.hstack([np.repeat(paths, k, axis=0), mark_idx[:, None]])
        enumerated += states.shape[0]

        back = np.linalg.norm(states - starts[origin], axis=1) <= return_band
        returning += int(np.count_nonzero(back))
        if np.any(back):
            min_cost = min(min_cost, float(np.min(costs[back])))
        bad = np.flatnonzero(back & (costs < cost_floor))
        for j in bad:
            key = (costs[j], depth, tuple(paths[j]), int(origin[j]))
            if best is None or key < best[0]:
                best = (key, j, states[j].copy(), paths[j].copy())

    measured = {"chains": float(enumerated), "returning": float(returning), "min_returning_cost": min_cost}
    if best is None:
        result = CheckResult("no_free_loop", CheckStatus.PASS, None, measured, RTOL)
    else:
        (cost, depth, path, start), _, end, _ = best
        witness = {
            "t": float(t),
            "start": starts[start].tolist(),
            "marks": list(path),
            "mark_values": nodes[list(path)].tolist(),
            "end": end.tolist(),
            "cost": float(cost),
            "length": int(depth),
        }
        result = CheckResult("no_free_loop", CheckStatus.FAIL, witness, measured, RTOL, float(delta2 - cost))
    logger.info("check_no_free_loop model=%s t=%g depth=%d chains=%d passed=%s",
                spec.name, t, max_depth, enumerated, result.passed)
    return ValidationReport.of([result])


def _quotient_result(name: str, quotients: np.ndarray, declared: float, pairs: LipschitzPairs,
                     valid: np.ndarray, extra: Dict[str, float]) -> CheckResult:
    estimate = float(np.max(quotients))
    measured = dict(extra)
    measured["estimate"] = estimate
    measured["declared"] = declared
    limit = declared * 1.01 + RTOL
    if estimate > limit:
        j = int(np.flatnonzero(valid)[np.argmax(quotients)])
        witness = {
            "t": float(pairs.t[j]),
            "x": pairs.x[j].tolist(),
            "x_alt": pairs.x_alt[j].tolist(),
            "quotient": estimate,
        }
        return CheckResult(name, CheckStatus.FAIL, witness, measured, 0.01, estimate - declared)
    return CheckResult(name, CheckStatus.PASS, None, measured, 0.01)


def estimate_lipschitz(spec: ProblemSpec, pairs: LipschitzPairs, driver=None) -> ValidationReport:
    """
    Maximal difference quotients of a, sigma, gamma in x and of f~ in (y, z).

    A quotient above its declared constant by more than 1% is flagged.

    Args:
        spec: Problem instance with declared LipschitzConstants
        pairs: Point pairs; pairs equal in the differenced argument are skipped
        driver: Optional DriverSpec whose f~ is checked against k_f

    Returns:
        ValidationReport with lipschitz_a_sigma, lipschitz_gamma (and lipschitz_f)
    """
    declared = spec.lipschitz
    dist = np.linalg.norm(pairs.x - pairs.x_alt, axis=1)
    valid = dist > 0
    if not np.any(valid):
        raise ValueError("no pair differs in x")
    t, x, x_alt, dist_v = pairs.t[valid], pairs.x[valid], pairs.x_alt[valid], dist[valid]
    results = []
    try:
        q_a = np.linalg.norm(spec.drift_at(t, x) - spec.drift_at(t, x_alt), axis=1) / dist_v
        q_s = np.linalg.norm(
            (spec.sigma_at(t, x) - spec.sigma_at(t, x_alt)).reshape(len(t), -1), axis=1
        ) / dist_v
        q_g = np.zeros_like(dist_v)
        for e in spec.marks.nodes:
            q_g = np.maximum(
                q_g, np.linalg.norm(spec.jump_at(t, x, e) - spec.jump_at(t, x_alt, e), axis=1) / dist_v
            )
    except Exception as exc:  # noqa: BLE001
        return ValidationReport.of([CheckResult("lipschitz_x", CheckStatus.ERROR, message=str(exc))])
    results.append(_quotient_result(
        "lipschitz_a_sigma", np.maximum(q_a, q_s), declared.k_a_sigma, pairs, valid,
        {"drift": float(np.max(q_a)), "sigma": float(np.max(q_s))},
    ))
    results.append(_quotient_result("lipschitz_gamma", q_g, declared.k_gamma, pairs, valid, {}))

    if driver is not None:
        gap = np.abs(pairs.y - pairs.y_alt) + np.linalg.norm(pairs.z - pairs.z_alt, axis=1)
        valid_f = gap > 0
        if not np.any(valid_f):
            raise ValueError("no pair differs in (y, z)")
        t, x = pairs.t[valid_f], pairs.x[valid_f]
        try:
            diff = np.abs(
                driver.local_values(t, x, pairs.y[valid_f], pairs.z[valid_f])
                - driver.local_values(t, x, pairs.y_alt[valid_f], pairs.z_alt[valid_f])
            )
        except Exception as exc:  # noqa: BLE001
            results.append(CheckResult("lipschitz_f", CheckStatus.ERROR, message=str(exc)))
        else:
            q_f = diff / gap[valid_f]
            estimate = float(np.max(q_f))
            measured = {"estimate": estimate, "declared": declared.k_f}
            if estimate > declared.k_f * 1.01 + RTOL:
                j = int(np.flatnonzero(valid_f)[np.argmax(q_f)])
                witness = {
                    "t": float(pairs.t[j]), "x": pairs.x[j].tolist(),
                    "y": float(pairs.y[j]), "y_alt": float(pairs.y_alt[j]),
                    "z": pairs.z[j].tolist(), "z_alt": pairs.z_alt[j].tolist(),
                    "quotient": estimate,
                }
                results.append(CheckResult("lipschitz_f", CheckStatus.FAIL, witness, measured, 0.01,
                                           estimate - declared.k_f))
            else:
                results.append(CheckResult("lipschitz_f", CheckStatus.PASS, None, measured, 0.01))
    return ValidationReport.of(results)
