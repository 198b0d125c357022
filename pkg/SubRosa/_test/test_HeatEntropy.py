"""
:Date: 18.10.2026

.. versionadded:: v0.1.0
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

import numpy as np

from SubRosa.Distribution import Frame
from SubRosa.GridBase import Grid, ScalarField, Density, PositivityError, SolvabilityError, StructuralError
from SubRosa.HeatEntropy import *
from SubRosa.Subelliptic import sub_laplacian
from SubRosa._test.test_GridBase import SubRosaUnitTest

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ UNIT TESTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def discrete_eigenvalue(field: ScalarField, frame: Frame) -> float:
	""" :return: :math:`\\kappa^2` with :math:`\\Delta^\\tau f = -\\kappa^2 f`, for an eigenfunction ``f`` """
	image = sub_laplacian(field, frame).values
	return -float(np.sum(image * field.values) / np.sum(field.values ** 2))

class TestEntropy(SubRosaUnitTest):

	def test_uniform(self):
		self.assertEqual(0.0, entropy(Density.uniform(Grid((8, 8)))))

	def test_small_perturbation(self):
		grid = Grid((32, 4))
		x = grid.mesh()[0]
		nu = Density(grid, 1 + 0.1 * np.cos(2 * np.pi * x))
		self.assertAlmostEqual(0.1 ** 2 / 4, entropy(nu), delta=1e-5)
		self.assertGreater(entropy(self.random_density(grid, np.random.default_rng(67))), 0.0)

	def test_positivity(self):
		grid = Grid((8, 8))
		ratio = np.ones(grid.dims)
		ratio[3, 4] = 1e-13
		with self.assertRaises(PositivityError):
			entropy(Density(grid, ratio))

class TestHeatEvolve(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((16, 16))
		self.frame = Frame.flat(self.grid)
		self.mode = ScalarField.from_function(self.grid, lambda x, y: np.cos(2 * np.pi * x))
		self.nu0 = Density(self.grid, 1 + 0.2 * self.mode.values)

	def tearDown(self) -> None:
		del self.grid, self.frame, self.mode, self.nu0

	def test_single_mode_decay(self):
		t_max, dt = 0.05, 1e-3
		trajectory = heat_evolve(self.nu0, t_max, dt, self.frame)
		self.assertEqual(51, len(trajectory))
		self.assertIs(self.nu0, trajectory[0][1])
		t, nu = trajectory[-1]
		self.assertAlmostEqual(t_max, t, delta=1e-15)

		# implicit midpoint amplification of an exact eigenfunction
		kappa2 = discrete_eigenvalue(self.mode, self.frame)
		factor = ((1 - 0.5 * dt * kappa2) / (1 + 0.5 * dt * kappa2)) ** 50
		self.assertArrayClose(1 + 0.2 * factor * self.mode.values, nu.ratio, atol=1e-9)
		self.assertArrayClose(1 + 0.2 * np.exp(-4 * np.pi ** 2 * t_max) * self.mode.values, nu.ratio, atol=5e-4)
		self.assertAlmostEqual(1.0, nu.mass, delta=1e-13)

	def test_rk4(self):
		implicit = heat_evolve(self.nu0, 0.01, 1e-4, self.frame)[-1][1]
		explicit = heat_evolve(self.nu0, 0.01, 1e-4, self.frame, stepper="rk4")[-1][1]
		self.assertArrayClose(implicit.ratio, explicit.ratio, atol=1e-6)

	def test_mass_per_step(self):
		rng = np.random.default_rng(89)
		rough = Density(self.grid, 1 + 0.1 * rng.uniform(-1, 1, self.grid.dims))
		for stepper, dt, tol in (("cn", 1e-3, 1e-12), ("cn", 1e-3, 1e-4), ("rk4", 1e-4, 1e-12)):
			trajectory = heat_evolve(rough, 20 * dt, dt, self.frame, stepper=stepper, tol=tol)
			self.assertEqual(21, len(trajectory))
			for (_, before), (_, after) in zip(trajectory[:-1], trajectory[1:]):
				self.assertLessEqual(abs(after.mass - before.mass), 1e-12)

		grid = Grid((8, 8, 8))
		frame = Frame.sin_heisenberg(grid)
		nu0 = Density(grid, 1 + 0.1 * rng.uniform(-1, 1, grid.dims))
		trajectory = heat_evolve(nu0, 0.01, 2.5e-3, frame, tol=1e-6)
		for (_, before), (_, after) in zip(trajectory[:-1], trajectory[1:]):
			self.assertLessEqual(abs(after.mass - before.mass), 1e-12)

	def test_times(self):
		trajectory = heat_evolve(self.nu0, 0.05, 0.01, self.frame, times=(0.01, 0.05, 0.2))
		self.assertCollectionEquals((0.0, 0.01, 0.05), (round(t, 12) for t, _ in trajectory))
		self.assertEqual(1, len(heat_evolve(self.nu0, 0.0, 0.01, self.frame)))

	def test_errors(self):
		with self.assertRaises(ValueError):
			heat_evolve(self.nu0, 0.05, 0.0, self.frame)
		with self.assertRaises(NotImplementedError):
			heat_evolve(self.nu0, 0.05, 0.01, self.frame, stepper="euler")
		with self.assertRaises(StructuralError):
			heat_evolve(Density.uniform(Grid((8, 8))), 0.05, 0.01, self.frame)

	def test_positivity_lost(self):
		rng = np.random.default_rng(71)
		rough = Density(self.grid, 1 + 0.1 * rng.uniform(-1, 1, self.grid.dims))
		# explicit RK4 far beyond its stability limit
		with self.assertRaises(PositivityError) as context:
			heat_evolve(rough, 0.5, 0.01, self.frame, stepper="rk4")
		self.assertIsNotNone(context.exception.time)
		self.assertGreater(context.exception.time, 0.0)
		self.assertEqual(5, context.exception.exit_code)

class TestWassersteinMetric(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((16, 8))
		self.frame = Frame.flat(self.grid)
		self.nu = Density.uniform(self.grid)
		self.mode = ScalarField.from_function(self.grid, lambda x, y: np.cos(2 * np.pi * x))

	def tearDown(self) -> None:
		del self.grid, self.frame, self.nu, self.mode

	def test_tangent_density(self):
		v = TangentDensity(self.nu, self.mode)
		self.assertIs(self.nu, v.base)
		self.assertIs(self.mode, v.eta)
		with self.assertRaises(SolvabilityError):
			TangentDensity(self.nu, self.mode + 0.1)
		with self.assertRaises(StructuralError):
			TangentDensity(Density.uniform(Grid((8, 8))), self.mode)

	def test_single_mode(self):
		v = TangentDensity(self.nu, self.mode)
		kappa2 = discrete_eigenvalue(self.mode, self.frame)
		self.assertRelativeError(wasserstein_metric(v, v, self.frame), 0.5 / kappa2, 1e-6)

		potential = metric_potential(v, self.frame)
		self.assertArrayClose(self.mode.values / kappa2, potential.values, atol=1e-8)

	def test_bilinear(self):
		other = ScalarField.from_function(self.grid, lambda x, y: np.sin(2 * np.pi * y))
		v1, v2 = TangentDensity(self.nu, self.mode), TangentDensity(self.nu, other)
		self.assertAlmostEqual(0.0, wasserstein_metric(v1, v2, self.frame), delta=1e-10)
		both = TangentDensity(self.nu, self.mode + other)
		expected = wasserstein_metric(v1, v1, self.frame) + wasserstein_metric(v2, v2, self.frame)
		self.assertRelativeError(wasserstein_metric(both, both, self.frame), expected, 1e-6)

	def test_different_bases(self):
		other = self.random_density(self.grid, np.random.default_rng(73))
		with self.assertRaises(StructuralError):
			wasserstein_metric(TangentDensity(self.nu, self.mode), TangentDensity(other, self.mode), self.frame)

	def test_coercivity_flat(self):
		grid = Grid((8, 8))
		frame = Frame.flat(grid)
		diagonal = ScalarField.from_function(grid, lambda x, y: np.cos(2 * np.pi * (x + y)))
		smallest = metric_coercivity(frame, Density.uniform(grid))
		self.assertRelativeError(smallest, 1 / discrete_eigenvalue(diagonal, frame), 1e-6)

	def test_coercivity_sin_heisenberg(self):
		grid = Grid((8, 8, 8))
		self.assertGreater(metric_coercivity(Frame.sin_heisenberg(grid), Density.uniform(grid)), 0.0)

	def test_path_action(self):
		self.assertEqual(0.0, path_action([(0.0, self.nu), (0.1, self.nu)], self.frame))
		trajectory = heat_evolve(Density(self.grid, 1 + 0.2 * self.mode.values), 0.01, 0.005, self.frame)
		self.assertGreater(path_action(trajectory, self.frame), 0.0)

class TestGradientFlow(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((16, 16))
		self.frame = Frame.flat(self.grid)
		x, y = self.grid.mesh()
		self.nu0 = Density(self.grid, 1 + 0.2 * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y))

	def tearDown(self) -> None:
		del self.grid, self.frame, self.nu0

	def test_identity_residual(self):
		self.assertEqual(0.0, identity_residual(Density.uniform(self.grid), self.frame))
		plain = sub_laplacian(self.nu0.field, self.frame)
		self.assertLessEqual(identity_residual(self.nu0, self.frame), 2e-2 * np.sqrt(np.mean(plain.values ** 2)))

	def test_heat_is_entropy_gradient_flow(self):
		trajectory = heat_evolve(self.nu0, 5e-3, 5e-4, self.frame)
		report = gradient_flow_check(trajectory, self.frame)
		self.assertEqual(11, len(report.times))
		self.assertEqual(9, len(report.entropy_rates))
		self.assertEqual(9, len(report.gaps))
		self.assertTrue(report.monotone)
		self.assertLessEqual(max(report.mass_drifts), 1e-12)
		for rate, metric in zip(report.entropy_rates, report.metric_values):
			self.assertLess(rate, 0.0)
			self.assertLessEqual(abs(rate - metric), 2e-2 * abs(rate))

		metrics = report.metrics()
		self.assertEqual(1.0, metrics["monotone"])
		self.assertEqual(report.entropies[-1], metrics["final_entropy"])
		self.assertEqual(report.max_gap, metrics["max_gap"])

	def test_sin_heisenberg_monotone(self):
		grid = Grid((8, 8, 8))
		frame = Frame.sin_heisenberg(grid)
		nu0 = self.random_density(grid, np.random.default_rng(79))
		report = gradient_flow_check(heat_evolve(nu0, 0.01, 2.5e-3, frame), frame)
		self.assertTrue(report.monotone)
		self.assertLessEqual(report.max_gap, 0.1 * max(abs(r) for r in report.entropy_rates))

	def test_too_short(self):
		with self.assertRaises(StructuralError):
			gradient_flow_check([(0.0, self.nu0), (0.1, self.nu0)], self.frame)
