"""Tests for the backward solvers and their diagnostics."""

import unittest
from dataclasses import replace

import numpy as np

from qvilab.core.errors import StepConvergenceError
from qvilab.core.types import SchemeMode
from qvilab.model.spec import DriverSpec, constant
from qvilab.montecarlo.binomial import binomial_oracle
from qvilab.operators.discrete import InterventionStencil
from qvilab.operators.grid import Grid, Slice, ValueField
from qvilab.solver.config import SolveConfig
from qvilab.solver.diagnostics import (
    compare_fields,
    perturbed_supersolution_check,
    residual_qvi,
)
from qvilab.solver.engine import (
    BackwardSolver,
    solve_double,
    solve_penalized,
    terminal_gaps,
)
from qvilab.solver.steppers import step_double, step_penalized

from tests.models import (
    _col,
    put_driver,
    put_grid,
    put_spec,
    reference_driver,
    reference_grid,
    reference_spec,
    scalar_spec,
    smooth_spec,
    zero_driver,
    zero_spec,
)


def reset_spec():
    """Impulses reset the state to 0 at cost 0.1, so M psi < psi away from 0."""
    return scalar_spec(
        sigma=constant(0.3),
        jump=lambda t, x, e: -x,
        cost=constant(0.1),
        terminal=lambda x: _col(x) ** 2,
        name="reset",
    )


class TestSolveConfig(unittest.TestCase):
    """Test scheme settings."""

    def test_defaults(self):
        cfg = SolveConfig()
        self.assertEqual(cfg.theta, 1.0)
        self.assertEqual(cfg.penalty_n, 0.0)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            SolveConfig(theta=1.5)
        with self.assertRaises(ValueError):
            SolveConfig(inner_tol=0.0)
        with self.assertRaises(ValueError):
            SolveConfig(inner_max=0)
        with self.assertRaises(ValueError):
            SolveConfig(damping=0.0)


class TestSteps(unittest.TestCase):
    """Test single backward steps."""

    def setUp(self):
        self.inactive = scalar_spec(cost=constant(1e6))
        self.grid = Grid.for_problem(self.inactive, 2.0, 21, 10)
        self.cfg = SolveConfig(penalty_n=4.0)

    def test_constants_are_stationary(self):
        next_slice = Slice(self.grid, np.full(21, 2.0), 1.0)
        for step in (step_penalized, step_double):
            out = step(next_slice, 0.9, self.inactive, self.grid, self.cfg, zero_driver())
            np.testing.assert_allclose(out.values, 2.0)
            self.assertAlmostEqual(out.t, 0.9)

    def test_driver_quadrature(self):
        next_slice = Slice(self.grid, np.full(21, 2.0), 1.0)
        driver = DriverSpec.local(constant(1.0))
        for step in (step_penalized, step_double):
            out = step(next_slice, 0.9, self.inactive, self.grid, self.cfg, driver)
            np.testing.assert_allclose(out.values, 2.0 + self.grid.dt)

    def test_penalty_pushes_down(self):
        spec = reference_spec()
        grid = reference_grid(spec, 81, 20)
        next_slice = Slice(grid, spec.terminal_at(grid.points), 1.0)
        t = grid.time(grid.time_steps - 1)
        plain = step_penalized(next_slice, t, spec, grid, SolveConfig(), reference_driver())
        penalized = step_penalized(next_slice, t, spec, grid, SolveConfig(penalty_n=16.0),
                                   reference_driver())
        self.assertTrue(np.all(penalized.values <= plain.values + 1e-10))

    def test_deactivated_upper_obstacle(self):
        """With chi = 1e6 the double step is the lower-obstacle step."""
        spec = put_spec()
        grid = Grid.for_problem(spec, 2.0, 101, 20)
        next_slice = Slice(grid, spec.terminal_at(grid.points), 1.0)
        driver = zero_driver()
        double = step_double(next_slice, 0.95, spec, grid, SolveConfig(), driver)
        lower = step_penalized(next_slice, 0.95, spec, grid, SolveConfig(), driver)
        np.testing.assert_allclose(double.values, lower.values, atol=1e-12)

    def test_upper_obstacle_post_check(self):
        spec = reset_spec()
        grid = Grid.for_problem(spec, 3.0, 61, 20)
        cfg = SolveConfig()
        psi = Slice(grid, spec.terminal_at(grid.points), 1.0)
        stencil = InterventionStencil.build(spec, grid, 1.0)
        self.assertTrue(np.any(stencil.apply_M(psi.values) < psi.values))

        out = step_double(psi, 0.95, spec, grid, cfg, zero_driver())
        bound = InterventionStencil.build(spec, grid, 0.95).apply_M(out.values)
        self.assertTrue(np.all(out.values <= bound + cfg.inner_tol + 1e-12))

    def test_double_step_below_penalized_step(self):
        """From the same later slice the double step stays under every penalized step."""
        for spec in (reset_spec(), reference_spec()):
            grid = Grid.for_problem(spec, 3.0, 61, 20)
            psi = Slice(grid, spec.terminal_at(grid.points), 1.0)
            double = step_double(psi, 0.95, spec, grid, SolveConfig(), zero_driver())
            for n in (1.0, 16.0, 256.0):
                with self.subTest(model=spec.name, n=n):
                    cfg = SolveConfig(penalty_n=n)
                    penalized = step_penalized(psi, 0.95, spec, grid, cfg, zero_driver())
                    self.assertLessEqual(float(np.max(double.values - penalized.values)), 1e-8)

    def test_step_error(self):
        next_slice = Slice(self.grid, np.full(21, 2.0), 1.0)
        cfg = SolveConfig(inner_max=1)
        with self.assertRaises(StepConvergenceError) as ctx:
            step_penalized(next_slice, 0.9, self.inactive, self.grid, cfg, DriverSpec.local(constant(1.0)))
        self.assertEqual(ctx.exception.iterations, 1)
        self.assertAlmostEqual(ctx.exception.t, 0.9)

    def test_off_grid_time(self):
        next_slice = Slice(self.grid, np.zeros(21), 1.0)
        with self.assertRaises(ValueError):
            step_double(next_slice, 0.55, self.inactive, self.grid, self.cfg, zero_driver())

    def test_non_local_driver_rejected(self):
        with self.assertRaises(ValueError):
            BackwardSolver(self.inactive, self.grid, DriverSpec.local_plus_k_m(constant(0.0), 0.1))


class TestZeroModel(unittest.TestCase):
    """Zero data gives the zero field."""

    def test_both_schemes(self):
        spec = zero_spec()
        grid = Grid.for_problem(spec, 2.0, 41, 20)
        for field in (solve_penalized(spec, grid, 4.0, zero_driver()), solve_double(spec, grid, zero_driver())):
            np.testing.assert_array_equal(field.values, 0.0)
            self.assertEqual(field.metadata["growth_C"], 0.0)

    def test_iterations_frame(self):
        spec = zero_spec()
        grid = Grid.for_problem(spec, 2.0, 11, 5)
        solver = BackwardSolver(spec, grid, zero_driver(), SchemeMode.DOUBLE)
        solver.run()
        frame = solver.get_iterations()
        self.assertEqual(list(frame.columns), ["k", "t", "inner_iterations"])
        self.assertEqual(len(frame), 5)


class TestAmericanPut(unittest.TestCase):
    """The penalized scheme at n = 0 prices an American put."""

    def test_matches_binomial_tree(self):
        spec = put_spec()
        field = solve_penalized(spec, put_grid(spec), 0.0, put_driver())
        value = field.evaluate(0.0, [[1.0]])[0]
        oracle = binomial_oracle(0.05, 0.2, 1.0, 1.0, 2000)
        self.assertLess(abs(value - oracle), 5e-3)


class TestReferenceModel(unittest.TestCase):
    """Penalization limit and ordering on the reference jump model."""

    @classmethod
    def setUpClass(cls):
        cls.spec = reference_spec()
        cls.grid = reference_grid(cls.spec)
        cls.driver = reference_driver()
        cls.double = solve_double(cls.spec, cls.grid, cls.driver)
        cls.penalized = {n: solve_penalized(cls.spec, cls.grid, n, cls.driver) for n in (1, 4, 16, 64, 256)}
        cls.lower = solve_penalized(cls.spec, cls.grid, 0, cls.driver)

    def test_terminal_slice(self):
        np.testing.assert_array_equal(self.double.values[-1], self.spec.terminal_at(self.grid.points))

    def test_monotone_in_n(self):
        levels = sorted(self.penalized)
        for small, large in zip(levels, levels[1:]):
            comparison = compare_fields(self.penalized[large], self.penalized[small])
            self.assertTrue(comparison.passed, f"n={large} above n={small}")

    def test_penalization_limit(self):
        self.assertLessEqual(self.penalized[256].sup_distance(self.double), 1e-2)

    def test_double_below_penalized(self):
        for n, field in sorted(self.penalized.items()):
            comparison = compare_fields(self.double, field)
            diff = self.double.values - field.values
            k, i = np.unravel_index(np.argmax(diff), diff.shape)
            where = (f"n={n}: excess {comparison.max_difference:.3g} "
                     f"at t={self.grid.time(k):.4g}, x={self.grid.points[i, 0]:.4g}")
            self.assertLessEqual(comparison.max_difference, 1e-8, where)
            self.assertEqual(comparison.violation_fraction, 0.0, where)

    def test_lower_bounds(self):
        for k in range(self.grid.time_steps + 1):
            h = self.spec.obstacle_at(self.grid.time(k), self.grid.points)
            if k < self.grid.time_steps:
                self.assertTrue(np.all(self.double.values[k] >= h))
            for field in self.penalized.values():
                if k < self.grid.time_steps:
                    self.assertTrue(np.all(field.values[k] >= h))
        # n = 0 solves the lower-obstacle problem alone and tops the decreasing family
        for field in self.penalized.values():
            self.assertTrue(compare_fields(field, self.lower).passed)

    def test_upper_obstacle_consistency(self):
        tol = SolveConfig().inner_tol + 1e-12
        for k in range(self.grid.time_steps):
            stencil = InterventionStencil.build(self.spec, self.grid, self.grid.time(k))
            self.assertTrue(np.all(self.double.values[k] <= stencil.apply_M(self.double.values[k]) + tol))

    def test_supersolution(self):
        check = perturbed_supersolution_check(self.double, 0.1, 50.0, 1.0, self.spec, self.grid,
                                              self.driver)
        self.assertTrue(check.passed, check)
        self.assertTrue(check.above_threshold)
        self.assertAlmostEqual(check.tolerance, 10.0 * (self.grid.dt + self.grid.dx ** 2))

    def test_zero_perturbation(self):
        check = perturbed_supersolution_check(self.double, 0.0, 1.0, 1.0, self.spec, self.grid,
                                              self.driver)
        res = residual_qvi(self.double, self.spec, self.grid, self.driver)
        self.assertEqual(check.min_residual, res.minimum)

    def test_decay_below_threshold(self):
        check = perturbed_supersolution_check(self.double, 0.1, 0.0, 1.0, self.spec, self.grid,
                                              self.driver)
        self.assertFalse(check.above_threshold)

    def test_identical_fields(self):
        comparison = compare_fields(self.double, self.double.copy())
        self.assertEqual(comparison.max_difference, 0.0)
        self.assertEqual(comparison.violation_fraction, 0.0)


class TestComparison(unittest.TestCase):
    """Ordered data gives ordered fields."""

    def test_data_monotonicity(self):
        low = reference_spec()
        high = reference_spec(psi_shift=0.1, h_shift=0.05)
        grid = reference_grid(low, 81, 100)
        driver = reference_driver()
        for solve in (solve_double, lambda s, g, d: solve_penalized(s, g, 4.0, d)):
            self.assertTrue(compare_fields(solve(low, grid, driver), solve(high, grid, driver)).passed)

    def test_driver_monotonicity(self):
        spec = reference_spec()
        grid = reference_grid(spec, 81, 100)
        low = solve_double(spec, grid, reference_driver())
        high = solve_double(spec, grid, DriverSpec.local(lambda t, x, y, z: -0.1 * y + 0.05))
        self.assertTrue(compare_fields(low, high).passed)


class TestResiduals(unittest.TestCase):
    """Test the discrete QVI residual."""

    def test_stationary_field(self):
        spec = scalar_spec(cost=constant(1e6), terminal=lambda x: np.cos(_col(x)))
        grid = Grid.for_problem(spec, 2.0, 21, 10)
        psi = spec.terminal_at(grid.points)
        field = ValueField(grid, np.tile(psi, (grid.time_steps + 1, 1)))
        res = residual_qvi(field, spec, grid, zero_driver())
        self.assertEqual(res.sup, 0.0)
        self.assertEqual(res.summary()["time_levels"], 10)

    def test_field_on_obstacle(self):
        """h = 0 and f~ = 1: v - h = 0 while the upper part is -1."""
        spec = scalar_spec(obstacle=constant(0.0))
        grid = Grid.for_problem(spec, 2.0, 21, 10)
        res = residual_qvi(ValueField.zeros(grid), spec, grid, DriverSpec.local(constant(1.0)))
        np.testing.assert_allclose(res.lower_part, 0.0)
        np.testing.assert_allclose(res.upper_part, -1.0)
        self.assertAlmostEqual(res.minimum, -1.0)
        self.assertAlmostEqual(res.sup, 1.0)

    def test_frame(self):
        spec = zero_spec()
        grid = Grid.for_problem(spec, 2.0, 11, 4)
        res = residual_qvi(ValueField.zeros(grid), spec, grid, zero_driver(), radius=1.0)
        frame = res.to_frame()
        self.assertEqual(list(frame.columns), ["t", "x1", "residual"])
        self.assertEqual(len(frame), 4 * 5)
        self.assertEqual(set(res.argmin()), {"t", "x1"})

    def test_incomplete_field(self):
        spec = zero_spec()
        grid = Grid.for_problem(spec, 2.0, 11, 4)
        with self.assertRaises(ValueError):
            residual_qvi(ValueField(grid), spec, grid, zero_driver())

    def test_refinement(self):
        """Halving dt and dx reduces the sup residual by a factor of at least 1.5."""
        spec = smooth_spec()
        driver = reference_driver()
        grid = Grid.for_problem(spec, 4.0, 41, 20)
        sups = []
        for _ in range(3):
            field = solve_double(spec, grid, driver)
            sups.append(residual_qvi(field, spec, grid, driver, radius=2.0).sup)
            grid = grid.refined()
        for coarse, fine in zip(sups, sups[1:]):
            self.assertGreaterEqual(coarse / fine, 1.5)

    def test_refinement_with_binding_obstacles(self):
        """Both obstacles bind at t = 0 and successive refinements move the solution less each time."""
        spec = reference_spec(h_shift=0.2)
        driver = reference_driver()
        grid = Grid.for_problem(spec, 4.0, 41, 20)
        states = np.linspace(-2.0, 2.0, 11).reshape(-1, 1)
        values = []
        for _ in range(4):
            field = solve_double(spec, grid, driver)
            values.append(field.evaluate(0.0, states))
            grid = grid.refined()
        gaps = [float(np.max(np.abs(fine - coarse))) for coarse, fine in zip(values, values[1:])]
        for coarse, fine in zip(gaps, gaps[1:]):
            self.assertLess(fine, coarse, gaps)

        grid = field.grid
        top = field.values[0]
        self.assertTrue(np.any(top == spec.obstacle_at(0.0, grid.points)))
        bound = InterventionStencil.build(spec, grid, 0.0).apply_M(top)
        self.assertTrue(np.any(np.abs(top - bound) <= 1e-6))


class TestTerminalGaps(unittest.TestCase):
    """|v(T - dt) - psi| shrinks as dt is halved."""

    def test_non_increasing(self):
        spec = reference_spec()
        probes = np.linspace(-2.0, 2.0, 5).reshape(-1, 1)
        frame = terminal_gaps(spec, reference_driver(), 4.0, 161, 25, probes, halvings=3)
        self.assertEqual(sorted(frame["level"].unique()), [0, 1, 2, 3])
        for _, group in frame.groupby("probe"):
            gaps = group.sort_values("level")["gap"].to_numpy()
            self.assertTrue(np.all(np.diff(gaps) <= 1e-12), gaps)

    def test_penalized_mode(self):
        spec = reference_spec()
        cfg = SolveConfig(penalty_n=4.0)
        frame = terminal_gaps(spec, reference_driver(), 4.0, 81, 10, [[0.0]], halvings=1,
                              mode=SchemeMode.PENALIZED, cfg=replace(cfg, inner_tol=1e-12))
        self.assertEqual(len(frame), 2)
        self.assertGreater(frame["gap"].iloc[0], frame["gap"].iloc[1])


if __name__ == "__main__":
    unittest.main()
