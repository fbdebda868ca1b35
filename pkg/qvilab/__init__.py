"""
qvilab - A solver lab for double-obstacle quasi-variational inequalities.

Solves the QVI by penalization and in the limit of infinite penalty, handles non-local
drivers by Picard iteration, checks the structural assumptions on a model and
cross-checks solved fields with Monte Carlo simulation of the jump diffusion.
"""

__version__ = "0.1.0"

# Core types
from qvilab.core.types import DriverMode, SchemeMode, CheckStatus, StopRuleKind, EstimatorForm
from qvilab.core.errors import (
    QVIError,
    StepConvergenceError,
    PicardDivergenceError,
    LoopBudgetError,
    GridMismatchError,
    PathExclusionError,
    ConfigError,
)

# Model
from qvilab.model.spec import MarkSpace, CoefficientSet, LipschitzConstants, ProblemSpec, DriverSpec
from qvilab.model.validation import (
    ValidationReport,
    SamplePoints,
    LipschitzPairs,
    validate_static,
    check_no_free_loop,
    estimate_lipschitz,
)

# Discretization
from qvilab.operators.grid import Grid, ValueField

# Solvers
from qvilab.solver.config import SolveConfig
from qvilab.solver.engine import BackwardSolver, solve_penalized, solve_double
from qvilab.solver.diagnostics import residual_qvi, perturbed_supersolution_check, compare_fields
from qvilab.fixedpoint.picard import IterationTrace, picard_solve, fixed_point_residual

# Monte Carlo
from qvilab.montecarlo.paths import EstimateCI, PathBundle, simulate_forward, moment_check
from qvilab.montecarlo.consistency import StopRule, pathwise_consistency, dual_gap
from qvilab.montecarlo.domination import domination_check
from qvilab.montecarlo.binomial import binomial_oracle

# Model documents
from qvilab.cli.config import RunConfig, parse_config, load_config

__all__ = [
    # Version
    "__version__",
    # Core types
    "DriverMode",
    "SchemeMode",
    "CheckStatus",
    "StopRuleKind",
    "EstimatorForm",
    # Errors
    "QVIError",
    "StepConvergenceError",
    "PicardDivergenceError",
    "LoopBudgetError",
    "GridMismatchError",
    "PathExclusionError",
    "ConfigError",
    # Model
    "MarkSpace",
    "CoefficientSet",
    "LipschitzConstants",
    "ProblemSpec",
    "DriverSpec",
    "ValidationReport",
    "SamplePoints",
    "LipschitzPairs",
    "validate_static",
    "check_no_free_loop",
    "estimate_lipschitz",
    # Discretization
    "Grid",
    "ValueField",
    # Solvers
    "SolveConfig",
    "BackwardSolver",
    "solve_penalized",
    "solve_double",
    "residual_qvi",
    "perturbed_supersolution_check",
    "compare_fields",
    "IterationTrace",
    "picard_solve",
    "fixed_point_residual",
    # Monte Carlo
    "EstimateCI",
    "PathBundle",
    "simulate_forward",
    "moment_check",
    "StopRule",
    "pathwise_consistency",
    "dual_gap",
    "domination_check",
    "binomial_oracle",
    # Model documents
    "RunConfig",
    "parse_config",
    "load_config",
]
