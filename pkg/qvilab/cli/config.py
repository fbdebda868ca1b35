"""Model documents: INI sections parsed into domain objects."""

import ast
import configparser
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..core.errors import ConfigError, DimensionMismatchError, ExprSyntaxError
from ..core.types import EstimatorForm, StopRuleKind
from ..model.spec import CoefficientSet, DriverSpec, LipschitzConstants, MarkSpace, ProblemSpec
from ..operators.grid import Grid
from ..solver.config import SolveConfig
from .expr import VARIABLES, Expr, eval_expr, parse_expr

logger = logging.getLogger(__name__)

# key -> (required, kind); kind "expr:<roles>" lists the variable roles a coefficient may read
MODEL_KEYS = {
    "name": (False, "str"),
    "dimension": (True, "int"),
    "horizon": (True, "float"),
    "drift": (True, "expr:tx"),
    "sigma": (True, "expr:tx"),
    "gamma": (True, "expr:txe"),
    "chi": (True, "expr:txe"),
    "h": (True, "expr:tx"),
    "psi": (True, "expr:x"),
    "driver": (True, "expr:txyz"),
    "marks": (True, "marks"),
    "k_gamma": (True, "float"),
    "growth_rho": (False, "float"),
    "k_f": (False, "float"),
    "k_lip_gamma": (False, "float"),
    "k_a_sigma": (False, "float"),
    "loop_delta1": (False, "float"),
    "loop_delta2": (False, "float"),
    "loop_depth": (False, "int"),
    "sample_radius": (False, "float"),
}
GRID_KEYS = {
    "box_radius": (True, "float"),
    "nodes": (True, "int"),
    "steps": (True, "int"),
}
SOLVER_KEYS = {
    "theta": (False, "float"),
    "inner_tol": (False, "float"),
    "inner_max": (False, "int"),
    "damping": (False, "float"),
    "penalty_n": (False, "float"),
    "residual_radius": (False, "float"),
}
PICARD_KEYS = {
    "k_nl": (False, "float"),
    "tol": (False, "float"),
    "kmax": (False, "int"),
}
MC_KEYS = {
    "t": (False, "float"),
    "x": (False, "point"),
    "dt_sim": (False, "float"),
    "n_paths": (False, "int"),
    "seed": (False, "int"),
    "stop_rule": (False, "str"),
    "epsilon": (False, "float"),
    "form": (False, "str"),
    "allowance": (False, "float"),
    "moment_p": (False, "float"),
    "moment_starts": (False, "points"),
    "n_list": (False, "floats"),
    "oracle_r": (False, "float"),
    "oracle_s": (False, "float"),
    "oracle_strike": (False, "float"),
    "oracle_steps": (False, "int"),
    "oracle_tol": (False, "float"),
    "domination_seeds": (False, "ints"),
}
SECTIONS = {"model": MODEL_KEYS, "grid": GRID_KEYS, "solver": SOLVER_KEYS,
            "picard": PICARD_KEYS, "mc": MC_KEYS}
REQUIRED_SECTIONS = ("model", "grid")


@dataclass(frozen=True)
class PicardOptions:
    k_nl: float = 0.0
    tol: float = 1e-6
    kmax: int = 30


@dataclass(frozen=True)
class MCOptions:
    """Monte Carlo settings for the verify command."""
    t: float = 0.0
    x: Tuple[float, ...] = (0.0,)
    dt_sim: float = 0.01
    n_paths: int = 1000
    seed: int = 0
    stop_rule: StopRuleKind = StopRuleKind.FIXED_T
    epsilon: Optional[float] = None
    form: EstimatorForm = EstimatorForm.PATHWISE
    allowance: float = 0.02
    moment_p: float = 4.0
    moment_starts: Tuple[Tuple[float, ...], ...] = ()
    n_list: Tuple[float, ...] = (1.0, 4.0, 16.0, 64.0, 256.0)
    oracle_r: float = 0.05
    oracle_s: float = 0.2
    oracle_strike: float = 1.0
    oracle_steps: int = 2000
    oracle_tol: float = 5e-3
    domination_seeds: Tuple[int, ...] = (0, 1, 2)


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs, built from one model document."""
    spec: ProblemSpec
    grid: Grid
    solve: SolveConfig
    f_tilde: Callable
    picard: PicardOptions = field(default_factory=PicardOptions)
    mc: MCOptions = field(default_factory=MCOptions)
    loop_depth: int = 4
    sample_radius: Optional[float] = None
    residual_radius: Optional[float] = None
    sources: Dict[str, str] = field(default_factory=dict)

    @property
    def driver(self) -> DriverSpec:
        """LOCAL driver when k_nl = 0, LOCAL_PLUS_K_M otherwise."""
        if self.picard.k_nl == 0.0:
            return DriverSpec.local(self.f_tilde)
        return DriverSpec.local_plus_k_m(self.f_tilde, self.picard.k_nl)

    @property
    def local_driver(self) -> DriverSpec:
        return DriverSpec.local(self.f_tilde)


# Value converters

def _number(section: str, key: str, raw: str, kind: str):
    try:
        return int(raw) if kind == "int" else float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {raw!r}", key) from None


def _literal(section: str, key: str, raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        raise ConfigError(f"[{section}] {key}: not a literal list or tuple: {raw!r}", key) from None


def _as_point(section: str, key: str, value, d: int) -> Tuple[float, ...]:
    point = tuple(float(v) for v in np.atleast_1d(np.asarray(value, dtype=float)))
    if len(point) != d:
        raise DimensionMismatchError(f"[{section}] {key}: expected {d} coordinates, got {len(point)}", key)
    return point


def _parse_marks(raw: str, d: int) -> MarkSpace:
    value = _literal("model", "marks", raw)
    if not isinstance(value, (list, tuple)) or not value:
        raise ConfigError("[model] marks: expected a non-empty list of (e, weight) pairs", "marks")
    nodes = []
    weights = []
    for entry in value:
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise ConfigError(f"[model] marks: bad entry {entry!r}", "marks")
        nodes.append(_as_point("model", "marks", entry[0], d))
        weights.append(float(entry[1]))
    try:
        return MarkSpace(np.asarray(nodes), np.asarray(weights))
    except ValueError as exc:
        raise ConfigError(f"[model] marks: {exc}", "marks") from exc


# Coefficient expressions

def _allowed(roles: str, d: int) -> Tuple[set, set]:
    """Variables a coefficient may read, and the ones that exist only in higher dimension."""
    allowed = set()
    if "t" in roles:
        allowed.add("t")
    if "y" in roles:
        allowed.add("y")
    for role in "xez":
        if role in roles:
            allowed.update(f"{role}{i + 1}" for i in range(d))
    wrong_dim = {f"{role}{i + 1}" for role in "xez" if role in roles for i in range(d, 2)}
    return allowed, wrong_dim


def _parse_components(key: str, raw: str, roles: str, d: int, count: int) -> List[Expr]:
    parts = [p.strip() for p in raw.split(";")]
    if len(parts) != count:
        raise DimensionMismatchError(
            f"[model] {key}: expected {count} ';'-separated components for dimension {d}, got {len(parts)}",
            key,
        )
    allowed, wrong_dim = _allowed(roles, d)
    exprs = []
    for part in parts:
        try:
            tree = parse_expr(part, VARIABLES)
        except ExprSyntaxError as exc:
            raise ConfigError(f"[model] {key}: {exc}", key) from exc
        extra = tree.variables() - allowed
        if extra & wrong_dim:
            raise DimensionMismatchError(
                f"[model] {key}: uses {', '.join(sorted(extra & wrong_dim))} but dimension is {d}", key
            )
        if extra:
            raise ConfigError(f"[model] {key}: may not use {', '.join(sorted(extra))}", key)
        exprs.append(tree)
    return exprs


def _env(d: int, t=None, x=None, e=None, y=None, z=None) -> dict:
    env = {}
    if t is not None:
        env["t"] = t
    for role, arr in (("x", x), ("e", e), ("z", z)):
        if arr is not None:
            arr = np.asarray(arr, dtype=float).reshape(-1, d)
            env.update({f"{role}{i + 1}": arr[:, i] for i in range(d)})
    if y is not None:
        env["y"] = y
    return env


def _stack(values: List, m: int) -> np.ndarray:
    return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (m,)) for v in values], axis=1)


def _vector_fn(exprs: List[Expr], d: int, with_marks: bool) -> Callable:
    if with_marks:
        def fn(t, x, e):
            return _stack([eval_expr(ex, _env(d, t=t, x=x, e=e)) for ex in exprs], x.shape[0])
    else:
        def fn(t, x):
            return _stack([eval_expr(ex, _env(d, t=t, x=x)) for ex in exprs], x.shape[0])
    return fn


def _matrix_fn(exprs: List[Expr], d: int) -> Callable:
    def fn(t, x):
        flat = _stack([eval_expr(ex, _env(d, t=t, x=x)) for ex in exprs], x.shape[0])
        return flat.reshape(-1, d, d)
    return fn


def _build_coefficients(values: Dict[str, str], d: int) -> Tuple[CoefficientSet, Callable]:
    drift = _parse_components("drift", values["drift"], "tx", d, d)
    sigma = _parse_components("sigma", values["sigma"], "tx", d, d * d)
    gamma = _parse_components("gamma", values["gamma"], "txe", d, d)
    (chi,) = _parse_components("chi", values["chi"], "txe", d, 1)
    (h,) = _parse_components("h", values["h"], "tx", d, 1)
    (psi,) = _parse_components("psi", values["psi"], "x", d, 1)
    (f_tilde,) = _parse_components("driver", values["driver"], "txyz", d, 1)

    coefficients = CoefficientSet(
        drift=_vector_fn(drift, d, with_marks=False),
        diffusion=_matrix_fn(sigma, d),
        jump=_vector_fn(gamma, d, with_marks=True),
        cost=lambda t, x, e: eval_expr(chi, _env(d, t=t, x=x, e=e)),
        obstacle=lambda t, x: eval_expr(h, _env(d, t=t, x=x)),
        terminal=lambda x: eval_expr(psi, _env(d, x=x)),
    )

    def driver(t, x, y, z):
        return eval_expr(f_tilde, _env(d, t=t, x=x, y=y, z=z))

    return coefficients, driver


# Document

def _read_sections(text: str) -> Dict[str, Dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, strict=True, comment_prefixes=("#",),
                                       default_section="__defaults__")
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"[{exc.section}] {exc.option}: duplicate key", exc.option) from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed document: {exc.message}") from exc

    sections = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        known = SECTIONS[name]
        values = dict(parser.items(name))
        for key in values:
            if key not in known:
                raise ConfigError(f"[{name}] unknown key '{key}'", key)
        for key, (required, _) in known.items():
            if required and key not in values:
                raise ConfigError(f"[{name}] missing required key '{key}'", key)
        sections[name] = values
    for name in REQUIRED_SECTIONS:
        if name not in sections:
            raise ConfigError(f"missing section [{name}]")
    return sections


def _typed(section: str, values: Dict[str, str], d: int) -> dict:
    """Convert scalar keys of a section; expressions and marks are left as text."""
    out = {}
    for key, raw in values.items():
        kind = SECTIONS[section][key][1]
        if kind in ("int", "float"):
            out[key] = _number(section, key, raw, kind)
        elif kind == "point":
            out[key] = _as_point(section, key, _literal(section, key, raw), d)
        elif kind == "points":
            out[key] = tuple(_as_point(section, key, p, d) for p in _literal(section, key, raw))
        elif kind == "floats":
            out[key] = tuple(float(v) for v in _literal(section, key, raw))
        elif kind == "ints":
            out[key] = tuple(int(v) for v in _literal(section, key, raw))
        else:
            out[key] = raw.strip()
    return out


def _enum(section: str, key: str, enum_cls, raw: str):
    try:
        return enum_cls(raw.lower())
    except ValueError:
        choices = ", ".join(m.value for m in enum_cls)
        raise ConfigError(f"[{section}] {key}: expected one of {choices}, got {raw!r}", key) from None


def parse_config(text: str) -> RunConfig:
    """
    Build the domain objects described by a model document.

    Args:
        text: INI document with [model], [grid] and optional [solver],
            [picard] and [mc] sections

    Returns:
        RunConfig

    Raises:
        ConfigError: Unknown, missing or malformed keys
        DimensionMismatchError: Expressions or lists that do not match the dimension
    """
    sections = _read_sections(text)
    raw_model = sections["model"]
    d = _number("model", "dimension", raw_model["dimension"], "int")
    if d not in (1, 2):
        raise ConfigError(f"[model] dimension must be 1 or 2, got {d}", "dimension")

    model = _typed("model", raw_model, d)
    coefficients, f_tilde = _build_coefficients(raw_model, d)
    try:
        spec = ProblemSpec(
            horizon=model["horizon"],
            dimension=d,
            coefficients=coefficients,
            marks=_parse_marks(raw_model["marks"], d),
            k_gamma=model["k_gamma"],
            growth_rho=model.get("growth_rho", 2.0),
            lipschitz=LipschitzConstants(
                k_f=model.get("k_f", 0.0),
                k_gamma=model.get("k_lip_gamma", 0.0),
                k_a_sigma=model.get("k_a_sigma", 0.0),
            ),
            loop_delta1=model.get("loop_delta1", 0.1),
            loop_delta2=model.get("loop_delta2", 0.1),
            name=model.get("name", "model"),
        )
        grid_keys = _typed("grid", sections["grid"], d)
        grid = Grid.for_problem(spec, grid_keys["box_radius"], grid_keys["nodes"], grid_keys["steps"])
        solver = _typed("solver", sections.get("solver", {}), d)
        residual_radius = solver.pop("residual_radius", None)
        solve = SolveConfig(**solver)
        picard = PicardOptions(**_typed("picard", sections.get("picard", {}), d))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    mc = _typed("mc", sections.get("mc", {}), d)
    if "stop_rule" in mc:
        mc["stop_rule"] = _enum("mc", "stop_rule", StopRuleKind, mc["stop_rule"])
    if "form" in mc:
        mc["form"] = _enum("mc", "form", EstimatorForm, mc["form"])
    mc.setdefault("x", (0.0,) * d)

    config = RunConfig(
        spec=spec,
        grid=grid,
        solve=solve,
        f_tilde=f_tilde,
        picard=picard,
        mc=MCOptions(**mc),
        loop_depth=model.get("loop_depth", 4),
        sample_radius=model.get("sample_radius"),
        residual_radius=residual_radius,
        sources={key: raw_model[key] for key in ("drift", "sigma", "gamma", "chi", "h", "psi", "driver")},
    )
    logger.debug("parsed model=%s d=%d nodes=%d steps=%d", spec.name, d, grid.nodes_per_axis, grid.time_steps)
    return config


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
