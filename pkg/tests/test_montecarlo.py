"""Tests for forward simulation and the probabilistic cross-checks."""

import unittest

import numpy as np

from qvilab.core.errors import PathExclusionError
from qvilab.core.types import EstimatorForm
from qvilab.montecarlo.binomial import binomial_oracle
from qvilab.montecarlo.consistency import StopRule, dual_gap, pathwise_consistency
from qvilab.montecarlo.domination import domination_check, fit_growth_constant
from qvilab.montecarlo.observers import PathObserver
from qvilab.model.spec import CoefficientSet, MarkSpace, ProblemSpec, constant
from qvilab.montecarlo.paths import EstimateCI, moment_check, moment_stability, simulate_forward
from qvilab.operators.grid import Grid
from qvilab.solver.engine import solve_penalized

from tests.models import (
    brownian_spec,
    geometric_spec,
    put_driver,
    put_grid,
    put_spec,
    reference_driver,
    reference_grid,
    reference_spec,
    scalar_spec,
    zero_driver,
    zero_spec,
)


class Recorder(PathObserver):
    """Counts simulator callbacks."""

    def on_start(self, t, x0, n_paths):
        self.segments = 0
        self.jumps = 0
        self.steps = 0
        self.finished = None

    def on_segment(self, event):
        self.segments += event.paths.size

    def on_jump(self, event):
        self.jumps += event.paths.size
        np.testing.assert_array_equal(event.post, 0.0)

    def on_step(self, event):
        self.steps += 1

    def on_finish(self, bundle):
        self.finished = bundle


class TestEstimateCI(unittest.TestCase):
    """Test estimate bookkeeping."""

    def test_from_samples(self):
        est = EstimateCI.from_samples("x", np.array([1.0, 2.0, 3.0]), seed=5)
        self.assertEqual(est.mean, 2.0)
        self.assertAlmostEqual(est.stderr, 1.0 / np.sqrt(3.0))
        self.assertEqual(est.to_row(), {"name": "x", "mean": 2.0, "stderr": est.stderr,
                                        "n_paths": 3, "seed": 5})

    def test_constant_samples(self):
        self.assertEqual(EstimateCI.from_samples("c", np.full(10, 0.3), seed=0).stderr, 0.0)

    def test_covers(self):
        est = EstimateCI("x", 1.0, 0.1, 100, 0)
        self.assertTrue(est.covers(1.25))
        self.assertFalse(est.covers(1.4))
        self.assertTrue(est.covers(1.4, allowance=0.1))

    def test_invalid(self):
        with self.assertRaises(ValueError):
            EstimateCI("x", 0.0, -1.0, 1, 0)
        with self.assertRaises(ValueError):
            EstimateCI.from_samples("x", np.array([]), seed=0)


class TestSimulation(unittest.TestCase):
    """Test the forward simulator."""

    def test_constant_dynamics(self):
        bundle = simulate_forward(scalar_spec(), 0.0, 0.7, 0.05, 200, seed=1)
        self.assertTrue(np.all(bundle.X == 0.7))
        self.assertEqual(bundle.X.shape, (200, 21, 1))
        self.assertGreater(bundle.n_jumps, 0)

    def test_geometric_mean(self):
        bundle = simulate_forward(geometric_spec(), 0.0, 1.0, 0.01, 10_000, seed=3)
        est = EstimateCI.from_samples("X_T", bundle.X[:, -1, 0], bundle.seed)
        self.assertTrue(est.covers(np.exp(0.05)), est)

    def test_reset_jumps(self):
        spec = scalar_spec(sigma=constant(0.3), jump=lambda t, x, e: -x)
        recorder = Recorder()
        bundle = simulate_forward(spec, 0.0, 0.5, 0.05, 200, seed=2, observers=[recorder])
        self.assertGreater(bundle.n_jumps, 0)
        np.testing.assert_array_equal(bundle.jump_post, 0.0)
        self.assertTrue(np.all(bundle.nonexpansive))
        self.assertEqual(recorder.jumps, bundle.n_jumps)
        self.assertEqual(recorder.steps, bundle.n_steps)
        self.assertGreaterEqual(recorder.segments, 200 * bundle.n_steps)
        self.assertIs(recorder.finished, bundle)

    def test_reproducible(self):
        spec = reference_spec()
        first = simulate_forward(spec, 0.0, 0.0, 0.05, 300, seed=11)
        second = simulate_forward(spec, 0.0, 0.0, 0.05, 300, seed=11)
        other = simulate_forward(spec, 0.0, 0.0, 0.05, 300, seed=12)
        np.testing.assert_array_equal(first.X, second.X)
        np.testing.assert_array_equal(first.jump_time, second.jump_time)
        self.assertFalse(np.array_equal(first.X, other.X))

    def test_path_streams_do_not_depend_on_count(self):
        spec = reference_spec()
        small = simulate_forward(spec, 0.0, 0.0, 0.05, 10, seed=4)
        large = simulate_forward(spec, 0.0, 0.0, 0.05, 20, seed=4)
        np.testing.assert_array_equal(small.X, large.X[:10])

    def test_frames(self):
        bundle = simulate_forward(reference_spec(), 0.0, 0.0, 0.1, 50, seed=0)
        frame = bundle.jumps_frame()
        self.assertEqual(list(frame.columns),
                         ["path", "time", "mark", "step", "pre1", "post1", "nonexpansive"])
        self.assertEqual(len(frame), bundle.n_jumps)
        summary = bundle.summary_frame()
        self.assertEqual(summary["name"].tolist(), ["X_T1", "jumps"])

    def test_invalid(self):
        spec = scalar_spec()
        with self.assertRaises(ValueError):
            simulate_forward(spec, 0.0, 0.0, 0.0, 10, seed=0)
        with self.assertRaises(ValueError):
            simulate_forward(spec, 1.0, 0.0, 0.1, 10, seed=0)


class TestMoments(unittest.TestCase):
    """Test moment estimates."""

    def test_constant_dynamics(self):
        bundle = simulate_forward(scalar_spec(), 0.0, -0.7, 0.1, 100, seed=0)
        est = moment_check(bundle, 4)
        self.assertAlmostEqual(est.mean, 0.7 ** 4, places=12)
        self.assertEqual(est.stderr, 0.0)

    def test_zeroth_moment(self):
        bundle = simulate_forward(brownian_spec(), 0.0, 1.0, 0.05, 500, seed=0)
        est = moment_check(bundle, 0)
        self.assertEqual(est.mean, 1.0)
        self.assertEqual(est.stderr, 0.0)

    def test_brownian_stability(self):
        result = moment_stability(brownian_spec(), [0.5, 1.0, 2.0], 4, n_paths=2000, seed=0)
        self.assertTrue(result.passed, result.to_frame())
        self.assertEqual(len(result.to_frame()), 3)

    def test_geometric_stability(self):
        result = moment_stability(geometric_spec(), [1.0, 2.0, 4.0], 4, n_paths=2000, seed=0)
        self.assertTrue(np.all(np.isfinite(result.ratios)))
        self.assertTrue(result.passed, result.to_frame())

    def test_geometric_small_starts_spread(self):
        """Moments scale like |x|^p, so starts below 1 pull the ratios apart."""
        small = moment_stability(geometric_spec(), [0.5, 1.0, 2.0], 4, n_paths=2000, seed=0)
        large = moment_stability(geometric_spec(), [1.0, 2.0, 4.0], 4, n_paths=2000, seed=0)
        self.assertFalse(small.passed, small.to_frame())
        self.assertGreater(small.spread, 4.0 * large.spread)

    def test_negative_order(self):
        bundle = simulate_forward(scalar_spec(), 0.0, 0.0, 0.5, 5, seed=0)
        with self.assertRaises(ValueError):
            moment_check(bundle, -1)


class TestPathwiseConsistency(unittest.TestCase):
    """The penalized representation reproduces the solver value."""

    def test_zero_model_is_exact(self):
        spec = zero_spec(value=0.5, obstacle=-1e6)
        grid = Grid.for_problem(spec, 2.0, 21, 10)
        field = solve_penalized(spec, grid, 4.0, zero_driver())
        bundle = simulate_forward(spec, 0.0, 0.3, 0.1, 100, seed=0)
        for stop_rule in (StopRule.fixed_t(), StopRule.hit_h(grid.dx)):
            for form in EstimatorForm:
                est = pathwise_consistency(field, 4.0, spec, bundle, stop_rule, zero_driver(), form)
                self.assertAlmostEqual(est.mean, field.evaluate(0.0, [[0.3]])[0], places=12)
                self.assertEqual(est.stderr, 0.0)
                self.assertEqual(est.excluded_fraction, 0.0)

    def test_reference_model(self):
        spec = reference_spec()
        grid = reference_grid(spec)
        driver = reference_driver()
        field = solve_penalized(spec, grid, 4.0, driver)
        bundle = simulate_forward(spec, 0.0, 0.0, grid.dt, 10_000, seed=0)
        est = pathwise_consistency(field, 4.0, spec, bundle, StopRule.fixed_t(), driver)
        self.assertTrue(est.covers(field.evaluate(0.0, [[0.0]])[0], allowance=0.02), est)

    def test_american_put(self):
        spec = put_spec()
        grid = put_grid(spec)
        field = solve_penalized(spec, grid, 0.0, put_driver())
        bundle = simulate_forward(spec, 0.0, 1.0, grid.dt, 10_000, seed=0)
        est = pathwise_consistency(field, 0.0, spec, bundle, StopRule.hit_h(grid.dx), put_driver())
        self.assertTrue(est.covers(field.evaluate(0.0, [[1.0]])[0], allowance=0.02), est)
        self.assertLess(est.excluded_fraction, 0.05)

    def test_exclusion(self):
        spec = brownian_spec()
        grid = Grid.for_problem(spec, 2.0, 21, 10)
        field = solve_penalized(spec, grid, 0.0, zero_driver())
        bundle = simulate_forward(spec, 0.0, 1.9, 0.1, 200, seed=0)
        with self.assertRaises(PathExclusionError) as ctx:
            pathwise_consistency(field, 0.0, spec, bundle, StopRule.fixed_t(), zero_driver())
        self.assertGreater(ctx.exception.fraction, 0.05)

    def test_stop_rule(self):
        self.assertEqual(StopRule.hit_h(0.1).epsilon, 0.1)
        with self.assertRaises(ValueError):
            StopRule.hit_h(-0.1)


class TestDualGap(unittest.TestCase):
    """Penalized values decrease towards the double-obstacle value."""

    def test_reference_model(self):
        spec = reference_spec()
        gap = dual_gap(spec, reference_grid(spec), reference_driver(), [1, 4, 16, 64, 256], 0.0, 0.0)
        values = gap.table["value"].to_numpy()
        self.assertTrue(np.all(np.diff(values) < 0.0), values)
        self.assertTrue(gap.monotone)
        self.assertTrue(gap.bounded)
        self.assertLessEqual(gap.final_gap, 1e-2)
        self.assertEqual(list(gap.table.columns), ["n", "value", "gap"])

    def test_inactive_penalty(self):
        spec = put_spec()
        grid = Grid.for_problem(spec, 2.0, 81, 20)
        gap = dual_gap(spec, grid, put_driver(), [0, 1, 4], 0.0, 1.0)
        values = gap.table["value"].to_numpy()
        self.assertEqual(values[0], values[1])
        self.assertEqual(values[1], values[2])
        lower = solve_penalized(spec, grid, 0.0, put_driver()).evaluate(0.0, [[1.0]])[0]
        self.assertEqual(values[0], lower)

    def test_levels_must_increase(self):
        spec = zero_spec()
        grid = Grid.for_problem(spec, 2.0, 11, 4)
        with self.assertRaises(ValueError):
            dual_gap(spec, grid, zero_driver(), [4, 1], 0.0, 0.0)


class TestDomination(unittest.TestCase):
    """The reflected radial process dominates the state."""

    def test_reference_model_three_seeds(self):
        spec = reference_spec()
        for seed in (0, 1, 2):
            result = domination_check(spec, 0.0, 0.0, 0.01, 1000, seed)
            self.assertTrue(result.passed, result.failures.head())
            self.assertEqual(result.summary()["violations"], 0)
            self.assertEqual(result.clamp_fraction, 0.0)

    def test_deterministic_case(self):
        result = domination_check(scalar_spec(), 0.0, 0.5, 0.1, 10, seed=0)
        self.assertTrue(result.passed)
        self.assertEqual(result.growth, 0.0)
        np.testing.assert_array_equal(result.trace.radius, 1.0)
        np.testing.assert_array_equal(result.trace.theta, 0.0)

    def test_geometric_with_jumps(self):
        spec = geometric_spec(jump=lambda t, x, e: -0.5 * x)
        result = domination_check(spec, 0.0, 1.0, 0.01, 1000, seed=0)
        self.assertTrue(result.passed, result.failures.head())
        trace = result.trace
        self.assertTrue(np.all(np.diff(trace.theta, axis=1) >= 0.0))
        self.assertTrue(np.all(trace.upsilon >= trace.floor))
        self.assertTrue(np.all(np.abs(trace.alpha) <= 1.0))

    def test_undersized_growth_constant_fails(self):
        """A zero growth constant freezes R while the state diffuses."""
        result = domination_check(brownian_spec(), 0.0, 0.0, 0.01, 100, seed=0, growth=0.0)
        self.assertFalse(result.passed)
        self.assertEqual(list(result.failures.columns), ["path", "first_violation_time", "X", "R"])
        self.assertTrue(np.all(result.failures["X"].abs() > result.failures["R"]))

    def test_fitted_growth(self):
        self.assertAlmostEqual(fit_growth_constant(reference_spec(), 15.0), 0.4)

    def test_scalar_only(self):
        marks = MarkSpace(np.array([[0.0, 0.0]]), np.array([1.0]))
        coefficients = CoefficientSet(constant(0.0), constant(0.0), constant(0.0), constant(1.0),
                                      constant(0.0), constant(0.0))
        spec = ProblemSpec(1.0, 2, coefficients, marks, k_gamma=1.0)
        with self.assertRaises(ValueError):
            domination_check(spec, 0.0, 0.0, 0.1, 10, seed=0)


class TestBinomialOracle(unittest.TestCase):
    """Test the American put tree."""

    def test_zero_maturity(self):
        self.assertAlmostEqual(binomial_oracle(0.05, 0.2, 1.0, 0.0, 10, spot=0.8), 0.2)

    def test_degenerate_tree(self):
        self.assertEqual(binomial_oracle(0.0, 0.0, 1.0, 1.0, 10), 0.0)

    def test_agrees_with_put_solve(self):
        """The tree and the lower-obstacle solve of the put model price the same option."""
        spec = put_spec()
        field = solve_penalized(spec, put_grid(spec), 0.0, put_driver())
        for spot in (1.0, 0.9):
            with self.subTest(spot=spot):
                value = binomial_oracle(0.05, 0.2, 1.0, 1.0, 2000, spot=spot)
                self.assertLess(abs(value - binomial_oracle(0.05, 0.2, 1.0, 1.0, 1000, spot=spot)), 1e-3)
                self.assertLess(abs(value - field.evaluate(0.0, [[spot]])[0]), 5e-3)

    def test_monotone_in_parameters(self):
        by_rate = [binomial_oracle(r, 0.2, 1.0, 1.0, 500) for r in (0.01, 0.05, 0.1)]
        by_vol = [binomial_oracle(0.05, s, 1.0, 1.0, 500) for s in (0.1, 0.2, 0.3)]
        by_time = [binomial_oracle(0.05, 0.2, 1.0, T, 500) for T in (0.5, 1.0, 2.0)]
        self.assertTrue(np.all(np.diff(by_rate) <= 0.0))
        self.assertTrue(np.all(np.diff(by_vol) >= 0.0))
        self.assertTrue(np.all(np.diff(by_time) >= 0.0))

    def test_invalid_steps(self):
        with self.assertRaises(ValueError):
            binomial_oracle(0.05, 0.2, 1.0, 1.0, 0)


if __name__ == "__main__":
    unittest.main()
