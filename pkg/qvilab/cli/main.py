"""
Command-line entry point.

    qvi <command> --config <path> [--out <dir>] [--seed <u64>] [--n <num>]
        [--mode penalized|double] [--check <name>]

Commands: validate, solve, iterate, verify, report. Each command writes its
CSVs and a ``<command>_summary.txt`` into the output directory and prints one
``FAIL <check> <detail>`` line per failed check. Exit status is 0 when every
check passes, 1 on a failed check and 2 on bad arguments.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from ..core.errors import ConfigError, PicardDivergenceError, QVIError
from ..core.settings import get_settings
from ..core.types import SchemeMode, StopRuleKind
from ..fixedpoint.picard import fixed_point_residual, picard_solve
from ..model.spec import DriverSpec
from ..model.validation import (
    LipschitzPairs,
    SamplePoints,
    ValidationReport,
    check_no_free_loop,
    estimate_lipschitz,
    validate_static,
)
from ..montecarlo.binomial import binomial_oracle
from ..montecarlo.consistency import StopRule, dual_gap, pathwise_consistency
from ..montecarlo.domination import domination_check
from ..montecarlo.paths import moment_stability, simulate_forward
from ..solver.diagnostics import residual_qvi
from ..solver.engine import solve_double, solve_penalized
from .config import RunConfig, load_config
from .output import write_frame, write_report, write_summary, write_summary_text

logger = logging.getLogger(__name__)

COMMANDS = ("validate", "solve", "iterate", "verify", "report")
CHECKS = ("consistency", "domination", "moments", "dualgap", "oracle")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def fail(check: str, detail: str):
    """Print one machine-parsable failure line."""
    print(f"FAIL {check} {' '.join(str(detail).split())}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qvi", description="Double-obstacle QVI solver lab")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="Model document (INI)")
    parser.add_argument("--out", default=None, help="Output directory (default QVI_OUT_DIR or ./out)")
    parser.add_argument("--seed", type=int, default=None, help="Root seed for simulations")
    parser.add_argument("--n", type=float, default=None, help="Penalty level")
    parser.add_argument("--mode", choices=[m.value for m in SchemeMode], default=SchemeMode.PENALIZED.value)
    parser.add_argument("--check", choices=CHECKS, default=None, help="verify: which check to run")
    parser.add_argument("-v", "--verbose", action="store_true", help="Progress bars and summaries")
    return parser


# Helpers


def _penalty(cfg: RunConfig, n: Optional[float]) -> float:
    return cfg.solve.penalty_n if n is None else n


def _probe(cfg: RunConfig) -> np.ndarray:
    return cfg.spec.points(cfg.mc.x)


def _local_driver_for(cfg: RunConfig, verbose: bool) -> DriverSpec:
    """The configured driver, made local by a Picard solve when k_nl > 0."""
    driver = cfg.driver
    if driver.is_local:
        return driver
    fixed, _ = picard_solve(cfg.spec, cfg.grid, driver, cfg.picard.tol, cfg.picard.kmax, cfg.solve, verbose)
    return driver.frozen_at(fixed)


# Commands


def cmd_validate(cfg: RunConfig, args, out: Path) -> bool:
    spec = cfg.spec
    radius = cfg.sample_radius or cfg.grid.box_radius
    samples = SamplePoints.cloud(spec, radius)
    report = validate_static(spec, samples, cfg.local_driver)

    starts = np.unique(samples.x, axis=0)
    for t in np.unique(samples.t):
        report = report.merge(check_no_free_loop(spec, float(t), starts, cfg.loop_depth))
    report = report.merge(estimate_lipschitz(spec, LipschitzPairs.cloud(spec, radius), cfg.local_driver))

    write_frame(report.witness_frame(), out, "validation")
    write_summary_text(out, "validate", report.to_text())
    _print_failures(report)
    return report.passed


def _print_failures(report: ValidationReport):
    for row in report.witness_frame().itertuples(index=False):
        detail = row.witness or report[row.check].message
        fail(row.check, f"status={row.status} margin={row.margin:.6g} {detail}")


def cmd_solve(cfg: RunConfig, args, out: Path) -> bool:
    driver = cfg.driver
    if not driver.is_local:
        raise ConfigError("solve needs a local driver (k_nl = 0); use the iterate command", "k_nl")
    mode = SchemeMode(args.mode)
    n = _penalty(cfg, args.n)
    if mode is SchemeMode.PENALIZED:
        field = solve_penalized(cfg.spec, cfg.grid, n, driver, cfg.solve, args.verbose)
    else:
        field = solve_double(cfg.spec, cfg.grid, driver, cfg.solve, args.verbose)
    residuals = residual_qvi(field, cfg.spec, cfg.grid, driver, cfg.residual_radius)

    write_frame(field.to_frame(), out, "field")
    write_frame(residuals.to_frame(), out, "residual")
    summary = {"passed": True, "mode": mode.value}
    if mode is SchemeMode.PENALIZED:
        summary["n"] = float(n)
    summary["value"] = float(field.evaluate(cfg.mc.t, _probe(cfg))[0])
    summary.update({f"residual_{k}": v for k, v in residuals.summary().items()})
    write_summary(out, "solve", summary)
    return True


def cmd_iterate(cfg: RunConfig, args, out: Path) -> bool:
    driver = DriverSpec.local_plus_k_m(cfg.f_tilde, cfg.picard.k_nl)
    try:
        field, trace = picard_solve(cfg.spec, cfg.grid, driver, cfg.picard.tol, cfg.picard.kmax,
                                    cfg.solve, args.verbose)
    except PicardDivergenceError as exc:
        write_frame(exc.trace.to_frame(), out, "trace")
        write_summary(out, "iterate", {"passed": False, "iterations": exc.trace.iterations,
                                       "final_diff": exc.trace.final_residual})
        raise

    residual = fixed_point_residual(field, cfg.spec, cfg.grid, driver, cfg.solve)
    write_frame(trace.to_frame(), out, "trace")
    write_frame(field.to_frame(), out, "field")
    write_summary(out, "iterate", {
        "passed": True,
        "k_nl": cfg.picard.k_nl,
        "iterations": trace.iterations,
        "final_diff": trace.final_residual,
        "fixed_point_residual": residual,
        "value": float(field.evaluate(cfg.mc.t, _probe(cfg))[0]),
    })
    return True


def _verify_consistency(cfg: RunConfig, args, out: Path) -> Dict[str, object]:
    mc = cfg.mc
    n = _penalty(cfg, args.n)
    driver = _local_driver_for(cfg, args.verbose)
    field = solve_penalized(cfg.spec, cfg.grid, n, driver, cfg.solve, args.verbose)
    if mc.stop_rule is StopRuleKind.HIT_H:
        stop = StopRule.hit_h(cfg.grid.dx if mc.epsilon is None else mc.epsilon)
    else:
        stop = StopRule.fixed_t()
    bundle = simulate_forward(cfg.spec, mc.t, mc.x, mc.dt_sim, mc.n_paths, mc.seed, verbose=args.verbose)
    estimate = pathwise_consistency(field, n, cfg.spec, bundle, stop, driver, mc.form)
    value = float(field.evaluate(mc.t, _probe(cfg))[0])
    passed = estimate.covers(value, mc.allowance)

    row = estimate.to_row()
    row.update({"solver_value": value, "excluded_fraction": estimate.excluded_fraction})
    write_frame(pd.DataFrame([row]), out, "consistency")
    if not passed:
        fail("consistency", f"mean={estimate.mean:.8g} stderr={estimate.stderr:.3g} solver={value:.8g}")
    return {"passed": passed, "n": float(n), "mean": estimate.mean, "stderr": estimate.stderr,
            "solver_value": value, "excluded_fraction": estimate.excluded_fraction}


def _verify_domination(cfg: RunConfig, args, out: Path) -> Dict[str, object]:
    mc = cfg.mc
    seeds = mc.domination_seeds if args.seed is None else (args.seed, args.seed + 1, args.seed + 2)
    rows = []
    failures = []
    for seed in seeds:
        result = domination_check(cfg.spec, mc.t, mc.x, mc.dt_sim, mc.n_paths, seed, verbose=args.verbose)
        rows.append(result.summary())
        if not result.passed:
            frame = result.failures.assign(seed=seed)
            failures.append(frame)
            first = frame.iloc[0]
            fail("domination", f"seed={seed} path={int(first['path'])} "
                               f"t={first['first_violation_time']:.6g} X={first['X']:.6g} R={first['R']:.6g}")
    write_frame(pd.DataFrame(rows), out, "domination")
    columns = ["path", "first_violation_time", "X", "R"]
    merged = pd.concat(failures, ignore_index=True) if failures else pd.DataFrame(columns=columns)
    write_frame(merged[columns], out, "domination_failures")
    return {"passed": not failures, "seeds": len(seeds), "violations": len(merged),
            "max_clamp_fraction": max(r["clamp_fraction"] for r in rows)}


def _verify_moments(cfg: RunConfig, args, out: Path) -> Dict[str, object]:
    mc = cfg.mc
    d = cfg.spec.dimension
    starts = mc.moment_starts or tuple((s,) * d for s in (0.5, 1.0, 2.0))
    result = moment_stability(cfg.spec, starts, mc.moment_p, mc.t, mc.dt_sim, mc.n_paths, mc.seed)
    write_frame(result.to_frame(), out, "moments")
    if not result.passed:
        fail("moments", f"spread={result.spread:.4g} factor={result.factor:g}")
    return {"passed": result.passed, "p": mc.moment_p, "spread": result.spread}


def _verify_dualgap(cfg: RunConfig, args, out: Path) -> Dict[str, object]:
    mc = cfg.mc
    driver = _local_driver_for(cfg, args.verbose)
    gap = dual_gap(cfg.spec, cfg.grid, driver, mc.n_list, mc.t, mc.x, cfg.solve)
    write_frame(gap.table, out, "dualgap")
    passed = gap.monotone and gap.bounded
    if not passed:
        fail("dualgap", f"monotone={str(gap.monotone).lower()} bounded={str(gap.bounded).lower()}")
    return {"passed": passed, "double_value": gap.double_value, "final_gap": gap.final_gap}


def _verify_oracle(cfg: RunConfig, args, out: Path) -> Dict[str, object]:
    mc = cfg.mc
    oracle = binomial_oracle(mc.oracle_r, mc.oracle_s, mc.oracle_strike, cfg.spec.horizon, mc.oracle_steps)
    field = solve_penalized(cfg.spec, cfg.grid, 0.0, cfg.local_driver, cfg.solve, args.verbose)
    point = cfg.spec.points((mc.oracle_strike,) * cfg.spec.dimension)
    value = float(field.evaluate(0.0, point)[0])
    error = abs(value - oracle)
    passed = error <= mc.oracle_tol
    write_frame(pd.DataFrame([{"solver_value": value, "oracle_value": oracle, "abs_error": error}]),
                out, "oracle")
    if not passed:
        fail("oracle", f"solver={value:.8g} oracle={oracle:.8g} error={error:.3g} tol={mc.oracle_tol:g}")
    return {"passed": passed, "solver_value": value, "oracle_value": oracle, "abs_error": error}


VERIFY: Dict[str, Callable] = {
    "consistency": _verify_consistency,
    "domination": _verify_domination,
    "moments": _verify_moments,
    "dualgap": _verify_dualgap,
    "oracle": _verify_oracle,
}


def cmd_verify(cfg: RunConfig, args, out: Path) -> bool:
    if args.check is None:
        raise ValueError(f"verify needs --check, one of {', '.join(CHECKS)}")
    summary = VERIFY[args.check](cfg, args, out)
    write_summary(out, f"verify_{args.check}", summary)
    return bool(summary["passed"])


def cmd_report(out: Path) -> bool:
    report = write_report(out)
    passed = True
    for line in report.read_text(encoding="utf-8").splitlines():
        key, _, value = line.partition(" = ")
        if key.endswith(".passed") and value.strip() == "false":
            passed = False
            fail("report", f"{key[: -len('.passed')]} did not pass")
    return passed


# Entry point


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Returns:
        0 if every invoked check passed, 1 on a failed check, 2 on bad arguments
    """
    settings = get_settings()
    logging.basicConfig(level=settings.log_level.upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out or settings.out_dir)

    try:
        if args.command == "report":
            return EXIT_OK if cmd_report(out) else EXIT_FAIL
        if not args.config:
            raise ValueError(f"{args.command} needs --config")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, mc=replace(cfg.mc, seed=args.seed))
        handler = {"validate": cmd_validate, "solve": cmd_solve,
                   "iterate": cmd_iterate, "verify": cmd_verify}[args.command]
        logger.info("command=%s model=%s out=%s", args.command, cfg.spec.name, out)
        passed = handler(cfg, args, out)
    except QVIError as exc:
        fail(exc.check, exc)
        return EXIT_FAIL
    except (ValueError, FileNotFoundError) as exc:
        fail("args", exc)
        return EXIT_USAGE
    return EXIT_OK if passed else EXIT_FAIL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
