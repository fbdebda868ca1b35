"""Tests for problem instances and the assumption validators."""

import itertools
import unittest

import numpy as np

from qvilab.core.errors import LoopBudgetError
from qvilab.core.types import CheckStatus, DriverMode
from qvilab.model.spec import DriverSpec, LipschitzConstants, MarkSpace, constant
from qvilab.model.validation import (
    LipschitzPairs,
    SamplePoints,
    ValidationReport,
    check_no_free_loop,
    estimate_lipschitz,
    validate_static,
)
from qvilab.operators.grid import Grid, ValueField

from tests.models import _col, reference_spec, scalar_spec, shift_spec, two_marks


class TestMarkSpace(unittest.TestCase):
    """Test the discrete mark measure."""

    def test_total_and_probabilities(self):
        marks = MarkSpace(np.array([1.0, -1.0, 0.5]), np.array([0.5, 1.0, 0.5]))
        self.assertEqual(marks.size, 3)
        self.assertEqual(marks.dimension, 1)
        self.assertAlmostEqual(marks.total, 2.0)
        np.testing.assert_allclose(marks.probabilities, [0.25, 0.5, 0.25])

    def test_weights_must_be_positive(self):
        with self.assertRaises(ValueError):
            MarkSpace(np.array([1.0, 2.0]), np.array([1.0, 0.0]))

    def test_nodes_non_empty(self):
        with self.assertRaises(ValueError):
            MarkSpace(np.empty((0, 1)), np.empty(0))


class TestProblemSpec(unittest.TestCase):
    """Test ProblemSpec invariants and evaluators."""

    def test_invalid_constants(self):
        with self.assertRaises(ValueError):
            scalar_spec(horizon=0.0)
        with self.assertRaises(ValueError):
            scalar_spec(k_gamma=0.0)
        with self.assertRaises(ValueError):
            scalar_spec(loop_delta2=0.0)

    def test_mark_dimension_must_match(self):
        marks = MarkSpace(np.array([[1.0, 0.0]]), np.array([1.0]))
        with self.assertRaises(ValueError):
            scalar_spec(marks=marks)

    def test_payoff_switches_at_horizon(self):
        spec = reference_spec()
        x = np.array([[0.0], [1.0]])
        np.testing.assert_allclose(spec.payoff_at(0.5, x), spec.obstacle_at(0.5, x))
        np.testing.assert_allclose(spec.payoff_at(1.0, x), spec.terminal_at(x))
        mixed = spec.payoff_at(np.array([0.5, 1.0]), x)
        self.assertAlmostEqual(mixed[0], 0.2)
        self.assertAlmostEqual(mixed[1], np.exp(-1.0))

    def test_evaluator_shapes(self):
        spec = reference_spec()
        x = np.linspace(-1, 1, 5).reshape(-1, 1)
        self.assertEqual(spec.drift_at(0.0, x).shape, (5, 1))
        self.assertEqual(spec.sigma_at(0.0, x).shape, (5, 1, 1))
        self.assertEqual(spec.jump_at(0.0, x, [1.5]).shape, (5, 1))
        self.assertEqual(spec.cost_at(0.0, x, [1.5]).shape, (5,))


class TestDriverSpec(unittest.TestCase):
    """Test driver modes."""

    def test_modes(self):
        f = constant(0.0)
        self.assertTrue(DriverSpec.local(f).is_local)
        non_local = DriverSpec.local_plus_k_m(f, 0.1)
        self.assertFalse(non_local.is_local)

        grid = Grid(2.0, 5, 2, 1.0)
        frozen = non_local.frozen_at(ValueField.zeros(grid))
        self.assertEqual(frozen.mode, DriverMode.FROZEN)
        self.assertEqual(frozen.k, 0.1)
        self.assertTrue(frozen.is_local)

    def test_frozen_needs_field(self):
        with self.assertRaises(ValueError):
            DriverSpec(constant(0.0), DriverMode.FROZEN, 0.1)

    def test_local_values(self):
        driver = DriverSpec.local(lambda t, x, y, z: y + 2.0 * z[:, 0])
        out = driver.local_values(0.0, np.zeros((3, 1)), np.array([1.0, 2.0, 3.0]), np.ones((3, 1)))
        np.testing.assert_allclose(out, [3.0, 4.0, 5.0])


class TestValidateStatic(unittest.TestCase):
    """Test the pointwise assumption checks."""

    def test_identity_case_passes(self):
        """gamma = 0, chi = 1, h = 0, psi = |x|: every check passes."""
        spec = scalar_spec(obstacle=constant(0.0), terminal=lambda x: np.abs(_col(x)))
        report = validate_static(spec, SamplePoints.cloud(spec, 3.0))
        self.assertTrue(report.passed, report.to_text())

    def test_terminal_consistency_witness(self):
        """psi(x) = x, gamma(T) = -1, chi = 0.5 fails at x = 0 since 0 > -1 + 0.5."""
        spec = scalar_spec(jump=constant(-1.0), cost=constant(0.5), terminal=lambda x: _col(x))
        samples = SamplePoints(np.array([1.0]), np.array([[0.0]]))
        report = validate_static(spec, samples)

        check = report["terminal_consistency"]
        self.assertEqual(check.status, CheckStatus.FAIL)
        self.assertEqual(check.witness["x"], [0.0])
        self.assertAlmostEqual(check.witness["lhs"], 0.0)
        self.assertAlmostEqual(check.witness["rhs"], -0.5)

    def test_impulse_bound_witness(self):
        """gamma = 2x at x = 2 with K_Gamma = 1 jumps to |x + gamma| = 6 > 2."""
        spec = scalar_spec(jump=lambda t, x, e: 2.0 * x)
        samples = SamplePoints(np.array([0.0]), np.array([[2.0]]))
        check = validate_static(spec, samples)["impulse_bound"]

        self.assertEqual(check.status, CheckStatus.FAIL)
        self.assertEqual(check.witness["x"], [2.0])
        self.assertAlmostEqual(check.witness["lhs"], 6.0)
        self.assertAlmostEqual(check.witness["rhs"], 2.0)

    def test_witness_reproduces_violation(self):
        spec = scalar_spec(jump=lambda t, x, e: 2.0 * x)
        report = validate_static(spec, SamplePoints.cloud(spec, 3.0))
        witness = report["impulse_bound"].witness
        x = np.array([witness["x"]])
        after = np.abs(x + spec.jump_at(witness["t"], x, witness["e"]))[0, 0]
        self.assertGreater(after, max(spec.k_gamma, abs(x[0, 0])))

    def test_evaluation_failure_is_error(self):
        spec = scalar_spec(cost=lambda t, x, e: np.log(_col(x)))
        samples = SamplePoints(np.zeros(3), np.array([[1.0], [2.0], [-1.0]]))
        check = validate_static(spec, samples)["cost_nonnegative"]
        self.assertEqual(check.status, CheckStatus.ERROR)
        self.assertEqual(check.witness["x"], [-1.0])

    def test_growth_exponent_flagged(self):
        spec = scalar_spec(obstacle=lambda t, x: np.exp(np.abs(_col(x))))
        check = validate_static(spec, SamplePoints.cloud(spec, 20.0, n_x=41))["growth_h"]
        self.assertEqual(check.status, CheckStatus.FAIL)

    def test_deterministic(self):
        spec = reference_spec()
        samples = SamplePoints.cloud(spec, 4.0)
        first = validate_static(spec, samples).to_text()
        second = validate_static(spec, samples).to_text()
        self.assertEqual(first, second)

    def test_reference_model_passes(self):
        spec = reference_spec()
        driver = DriverSpec.local(lambda t, x, y, z: -0.1 * y)
        report = validate_static(spec, SamplePoints.cloud(spec, 4.0), driver)
        self.assertTrue(report.passed, report.to_text())


class TestReportMerge(unittest.TestCase):
    """Test that merging reports does not depend on order."""

    def test_merge_order(self):
        spec = scalar_spec(jump=lambda t, x, e: 2.0 * x)
        a = validate_static(spec, SamplePoints(np.zeros(2), np.array([[1.0], [2.0]])))
        b = validate_static(spec, SamplePoints(np.zeros(2), np.array([[3.0], [0.5]])))
        c = check_no_free_loop(shift_spec(0.0), 0.0, [[0.0]], 2)
        left = a.merge(b).merge(c)
        right = c.merge(b.merge(a))
        self.assertEqual(left.to_text(), right.to_text())
        self.assertAlmostEqual(left["impulse_bound"].witness["lhs"], 9.0)

    def test_witness_frame(self):
        report = check_no_free_loop(shift_spec(0.0), 0.0, [[0.0]], 2)
        frame = report.witness_frame()
        self.assertEqual(list(frame.columns), ["check", "status", "margin", "witness"])
        self.assertEqual(frame["check"].tolist(), ["no_free_loop"])

    def test_empty_report_passes(self):
        self.assertTrue(ValidationReport().passed)


def brute_force_loops(spec, t, starts, depth):
    """Cheapest violating chain by plain enumeration: (cost, length, marks) or None."""
    nodes = spec.marks.nodes
    best = None
    for start in starts:
        for length in range(1, depth + 1):
            for marks in itertools.product(range(spec.marks.size), repeat=length):
                x = np.array([start], dtype=float)
                cost = 0.0
                for i in marks:
                    cost += float(spec.cost_at(t, x, nodes[i])[0])
                    x = x + spec.jump_at(t, x, nodes[i])
                if np.linalg.norm(x[0] - start) <= spec.loop_delta1 and cost < spec.loop_delta2:
                    key = (cost, length, marks)
                    if best is None or key < best:
                        best = key
    return best


class TestNoFreeLoop(unittest.TestCase):
    """Test the impulse-chain enumeration."""

    def test_costly_shifts_pass(self):
        """+-1 shifts at cost 0.3: every returning chain costs at least 0.6."""
        report = check_no_free_loop(shift_spec(0.3), 0.0, np.linspace(-2, 2, 5).reshape(-1, 1), 4)
        check = report["no_free_loop"]
        self.assertTrue(check.passed)
        self.assertAlmostEqual(check.measured["min_returning_cost"], 0.6)

    def test_free_shifts_fail_with_two_step_chain(self):
        report = check_no_free_loop(shift_spec(0.0), 0.0, [[0.0]], 4)
        witness = report["no_free_loop"].witness
        self.assertFalse(report.passed)
        self.assertEqual(witness["length"], 2)
        self.assertEqual(witness["marks"], [0, 1])
        self.assertEqual(witness["mark_values"], [[1.0], [-1.0]])
        self.assertAlmostEqual(witness["cost"], 0.0)

    def test_no_returning_chain(self):
        spec = scalar_spec(jump=constant(5.0), cost=constant(0.0), k_gamma=1.0)
        report = check_no_free_loop(spec, 0.0, [[0.0], [1.0]], 3)
        self.assertTrue(report.passed)
        self.assertEqual(report["no_free_loop"].measured["returning"], 0.0)

    def test_budget(self):
        with self.assertRaises(LoopBudgetError):
            check_no_free_loop(shift_spec(0.3), 0.0, [[0.0]], 4, budget=8)

    def test_agrees_with_brute_force(self):
        """Position-dependent costs on a two-mark instance."""
        spec = scalar_spec(
            jump=lambda t, x, e: e,
            cost=lambda t, x, e: 0.1 + 0.1 * np.abs(_col(x)),
            marks=two_marks(1.0, -1.0),
            k_gamma=5.0,
            loop_delta1=0.1,
            loop_delta2=0.35,
        )
        starts = np.linspace(-2.0, 2.0, 9)
        for depth in (1, 2, 3, 4):
            expected = brute_force_loops(spec, 0.0, starts, depth)
            check = check_no_free_loop(spec, 0.0, starts.reshape(-1, 1), depth)["no_free_loop"]
            if expected is None:
                self.assertTrue(check.passed)
                continue
            self.assertFalse(check.passed)
            self.assertAlmostEqual(check.witness["cost"], expected[0])
            self.assertEqual(check.witness["length"], expected[1])
            self.assertEqual(tuple(check.witness["marks"]), expected[2])


class TestLipschitz(unittest.TestCase):
    """Test the difference-quotient estimates."""

    def test_linear_drift_at_declared_constant(self):
        spec = scalar_spec(drift=lambda t, x: 2.0 * x, lipschitz=LipschitzConstants(k_a_sigma=2.0))
        report = estimate_lipschitz(spec, LipschitzPairs.cloud(spec, 2.0))
        check = report["lipschitz_a_sigma"]
        self.assertTrue(check.passed)
        self.assertAlmostEqual(check.measured["estimate"], 2.0, places=8)

    def test_linear_drift_above_declared_constant(self):
        spec = scalar_spec(drift=lambda t, x: 2.0 * x, lipschitz=LipschitzConstants(k_a_sigma=1.0))
        check = estimate_lipschitz(spec, LipschitzPairs.cloud(spec, 2.0))["lipschitz_a_sigma"]
        self.assertEqual(check.status, CheckStatus.FAIL)
        self.assertAlmostEqual(check.witness["quotient"], 2.0, places=8)

    def test_sine_driver(self):
        spec = scalar_spec(lipschitz=LipschitzConstants(k_f=1.0))
        driver = DriverSpec.local(lambda t, x, y, z: np.sin(y))
        check = estimate_lipschitz(spec, LipschitzPairs.cloud(spec, 1.0), driver)["lipschitz_f"]
        self.assertTrue(check.passed)
        self.assertLessEqual(check.measured["estimate"], 1.0)

    def test_reference_constants(self):
        spec = reference_spec()
        driver = DriverSpec.local(lambda t, x, y, z: -0.1 * y)
        report = estimate_lipschitz(spec, LipschitzPairs.cloud(spec, 4.0), driver)
        self.assertTrue(report.passed, report.to_text())


if __name__ == "__main__":
    unittest.main()
