"""
:Date: 16.10.2026

.. versionadded:: v0.1.0
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

import unittest

import numpy as np

from SubRosa.GridBase import *

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ UNIT TESTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class SubRosaUnitTest(unittest.TestCase):

	def assertCollectionEquals(self, first, second, msg=None):
		self.assertTupleEqual(tuple(first), tuple(second), msg=msg)

	def assertArrayClose(self, first, second, atol=1e-12, rtol=0.0, msg=None):
		first, second = np.asarray(first, dtype=np.float64), np.asarray(second, dtype=np.float64)
		self.assertEqual(first.shape, second.shape, msg=msg)
		if not np.allclose(first, second, atol=atol, rtol=rtol):
			worst = float(np.max(np.abs(first - second)))
			self.fail(self._formatMessage(msg, f"arrays differ by up to {worst:.3e} (atol {atol:.1e}, rtol {rtol:.1e})"))

	def assertRelativeError(self, value, reference, bound, msg=None):
		value, reference = np.asarray(value, dtype=np.float64), np.asarray(reference, dtype=np.float64)
		error = float(np.linalg.norm(value - reference) / max(np.linalg.norm(reference), np.finfo(float).tiny))
		self.assertLessEqual(error, bound, msg=msg)

	@staticmethod
	def random_density(grid: Grid, rng: np.random.Generator, amplitude: float = 0.3) -> Density:
		""" A smooth positive density built from one random Fourier mode per axis. """
		mesh = grid.mesh()
		ratio = 1.0 + sum(amplitude / grid.ndim * np.sin(2 * np.pi * m + rng.uniform(0, 2 * np.pi)) for m in mesh)
		return Density(grid, ratio, normalize=True)

class TestErrors(SubRosaUnitTest):

	def test_exit_codes(self):
		self.assertEqual(1, SubRosaError.exit_code)
		for error in (StructuralError, ExpressionError, ConfigError, DegenerateFrameError):
			self.assertEqual(3, error.exit_code)
		for error in (SolvabilityError, ConvergenceError):
			self.assertEqual(4, error.exit_code)
		for error in (IntegrationError, PositivityError):
			self.assertEqual(5, error.exit_code)

	def test_str(self):
		self.assertEqual("message", str(SubRosaError("message")))
		self.assertEqual("message (raised from 3)", str(StructuralError("message", 3)))
		self.assertEqual("bad at position 4 in 'x + $'", str(ExpressionError("bad", "x + $", 4)))
		self.assertEqual(0.5, ConvergenceError("stalled", None, 0.5).residual)
		self.assertEqual(0.25, PositivityError("lost", None, 0.25).time)

class TestGrid(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid2 = Grid((4, 8))
		self.grid3 = Grid((4, 8, 16), (1.0, 2.0, 0.5))

	def tearDown(self) -> None:
		del self.grid2, self.grid3

	def test_init(self):
		self.assertCollectionEquals((4, 8), self.grid2.dims)
		self.assertCollectionEquals((1.0, 1.0), self.grid2.period)
		self.assertCollectionEquals((0.25, 0.125), self.grid2.spacing)
		self.assertEqual(2, self.grid2.ndim)
		self.assertEqual(32, self.grid2.size)
		self.assertEqual(1 / 32, self.grid2.weight)
		self.assertCollectionEquals(("x", "y"), self.grid2.axis_names)

		self.assertCollectionEquals((0.25, 0.25, 0.03125), self.grid3.spacing)
		self.assertCollectionEquals(("x", "y", "z"), self.grid3.axis_names)

	def test_init_errors(self):
		with self.assertRaises(StructuralError):
			Grid((8,))
		with self.assertRaises(StructuralError):
			Grid((8, 8, 8, 8))
		with self.assertRaises(StructuralError):
			Grid((3, 8))
		with self.assertRaises(StructuralError):
			Grid((8, 8), (1.0,))
		with self.assertRaises(StructuralError):
			Grid((8, 8), (1.0, -1.0))

	def test_points(self):
		points = self.grid2.points()
		self.assertEqual((32, 2), points.shape)
		self.assertCollectionEquals((0.0, 0.0), points[0])
		self.assertCollectionEquals((0.0, 0.125), points[1])
		self.assertCollectionEquals((0.25, 0.0), points[8])
		x, y = self.grid2.mesh()
		self.assertArrayClose(x.ravel(), points[:, 0], atol=0)
		self.assertArrayClose(y.ravel(), points[:, 1], atol=0)

	def test_wrap(self):
		wrapped = self.grid2.wrap(np.array([[-1e-17, 1.25], [2.5, -0.75]]))
		self.assertTrue(np.all(wrapped >= 0))
		self.assertTrue(np.all(wrapped < 1))
		self.assertArrayClose([0.25, 0.25], wrapped[:, 1], atol=1e-15)
		self.assertAlmostEqual(0.5, wrapped[1, 0])

	def test_minimal_image(self):
		self.assertArrayClose([[-0.1, 0.1]], self.grid2.minimal_image(np.array([[0.9, -0.9]])), atol=1e-15)

	def test_refined(self):
		self.assertEqual(Grid((8, 16, 32), (1.0, 2.0, 0.5)), self.grid3.refined(2))
		self.assertNotEqual(self.grid3, self.grid3.refined(2))
		self.assertEqual(hash(Grid((4, 8))), hash(self.grid2))

	def test_require_same_grid(self):
		f = ScalarField.zeros(self.grid2)
		self.assertEqual(self.grid2, require_same_grid(f, Density.uniform(self.grid2), self.grid2))
		with self.assertRaises(StructuralError):
			require_same_grid(f, ScalarField.zeros(Grid((8, 4))))

class TestFields(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((8, 8))
		self.field = ScalarField.from_function(self.grid, lambda x, y: np.sin(2 * np.pi * x) + y)

	def tearDown(self) -> None:
		del self.grid, self.field

	def test_init(self):
		self.assertEqual((8, 8), self.field.values.shape)
		self.assertArrayClose(ScalarField(self.grid, np.arange(64)).values, np.arange(64).reshape(8, 8), atol=0)
		self.assertArrayClose(np.full((8, 8), 2.0), ScalarField(self.grid, 2.0).values, atol=0)
		with self.assertRaises(StructuralError):
			ScalarField(self.grid, np.zeros(10))
		with self.assertRaises(StructuralError):
			ScalarField(self.grid, np.full((8, 8), np.nan))

	def test_immutable(self):
		self.assertFalse(self.field.values.flags.writeable)
		with self.assertRaises(ValueError):
			self.field.values[0, 0] = 1.0

	def test_arithmetic(self):
		doubled = self.field + self.field
		self.assertArrayClose(2 * self.field.values, doubled.values, atol=0)
		self.assertArrayClose(self.field.values - 1, (self.field - 1).values, atol=0)
		self.assertArrayClose(1 - self.field.values, (1 - self.field).values, atol=0)
		self.assertArrayClose(-self.field.values, (-self.field).values, atol=0)
		self.assertArrayClose(self.field.values / 2, (self.field / 2).values, atol=0)
		with self.assertRaises(StructuralError):
			self.field + ScalarField.zeros(Grid((4, 4)))

	def test_vector_field(self):
		V = VectorField.constant(self.grid, (1.0, 2.0))
		self.assertEqual((2, 8, 8), V.components.shape)
		self.assertArrayClose(np.full((8, 8), 5.0), V.dot(V).values, atol=0)
		self.assertArrayClose(np.full((8, 8), 2.0), V.component(1).values, atol=0)
		self.assertArrayClose((V * 3).components, (V + V + V).components, atol=1e-15)
		self.assertArrayClose(VectorField.zeros(self.grid).components, (V - V).components, atol=0)
		scaled = V * self.field
		self.assertArrayClose(2 * self.field.values, scaled.components[1], atol=0)

	def test_density(self):
		nu = Density(self.grid, 2.0)
		self.assertAlmostEqual(2.0, nu.mass)
		self.assertAlmostEqual(1.0, nu.normalized().mass)
		self.assertAlmostEqual(1.0, Density.uniform(self.grid).mass)
		self.assertAlmostEqual(1.0, Density.from_field(self.field + 3).mass)
		self.assertFalse(nu.ratio.flags.writeable)
		with self.assertRaises(PositivityError):
			Density(self.grid, self.field.values)
		with self.assertRaises(PositivityError):
			Density(self.grid, 0.0)

class TestQuadrature(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((16, 8, 8))
		self.rng = np.random.default_rng(7)

	def tearDown(self) -> None:
		del self.grid, self.rng

	def test_integrate(self):
		sin = ScalarField.from_function(self.grid, lambda x, y, z: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * z))
		self.assertAlmostEqual(0.0, integrate(sin), delta=1e-15)
		self.assertAlmostEqual(3.0, integrate(ScalarField(self.grid, 3.0)), delta=1e-14)
		nu = Density(self.grid, 2.0)
		self.assertAlmostEqual(6.0, integrate(ScalarField(self.grid, 3.0), nu), delta=1e-13)

	def test_inner_product(self):
		a = ScalarField(self.grid, self.rng.standard_normal(self.grid.dims))
		self.assertAlmostEqual(integrate(a * a), inner_product(a, a), delta=1e-13)
		V = VectorField.constant(self.grid, (1.0, 0.0, 1.0))
		self.assertAlmostEqual(2.0, inner_product(V, V), delta=1e-13)
		with self.assertRaises(StructuralError):
			inner_product(a, V)

	def test_norm(self):
		two = ScalarField(self.grid, -2.0)
		self.assertAlmostEqual(2.0, norm(two, "l1"), delta=1e-13)
		self.assertAlmostEqual(2.0, norm(two, "l2"), delta=1e-13)
		self.assertAlmostEqual(2.0, norm(two, "linf"))
		self.assertAlmostEqual(2.0, norm(np.full(self.grid.dims, 2.0), "l2", grid=self.grid), delta=1e-13)
		self.assertAlmostEqual(5.0, norm(VectorField.constant(self.grid, (3.0, 4.0, 0.0)), "linf"))
		with self.assertRaises(StructuralError):
			norm(np.zeros(self.grid.dims))
		with self.assertRaises(NotImplementedError):
			norm(two, "h1")

class TestDifferentialOperators(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((32, 8, 8))
		self.rng = np.random.default_rng(11)
		self.sin = ScalarField.from_function(self.grid, lambda x, y, z: np.sin(2 * np.pi * x))

	def tearDown(self) -> None:
		del self.grid, self.rng, self.sin

	def test_constants(self):
		for order in (2, 4):
			self.assertArrayClose(np.zeros((3, *self.grid.dims)), grad(ScalarField(self.grid, 1.7), order).components,
								  atol=0)

	def test_grad_accuracy(self):
		x = self.grid.mesh()[0]
		exact = 2 * np.pi * np.cos(2 * np.pi * x)
		error4 = np.max(np.abs(grad(self.sin, 4).components[0] - exact))
		error2 = np.max(np.abs(grad(self.sin, 2).components[0] - exact))
		self.assertLessEqual(error4, 2 * np.pi * 1e-4)
		self.assertLess(error4, error2 / 50)
		self.assertArrayClose(np.zeros((8, 8)), grad(self.sin).components[1][0], atol=0)

	def test_unknown_order(self):
		with self.assertRaises(NotImplementedError):
			difference(self.sin.values, 0, 0.1, order=6)

	def test_divergence_adjoint(self):
		nu = self.random_density(self.grid, self.rng)
		W = VectorField(self.grid, self.rng.standard_normal((3, *self.grid.dims)))
		f = ScalarField(self.grid, self.rng.standard_normal(self.grid.dims))
		lhs = inner_product(divergence(W, nu), f, nu)
		rhs = -inner_product(W, grad(f), nu)
		self.assertAlmostEqual(lhs, rhs, delta=1e-11 * max(1.0, abs(rhs)))

	def test_divergence_integral(self):
		nu = self.random_density(self.grid, self.rng)
		W = VectorField(self.grid, self.rng.standard_normal((3, *self.grid.dims)))
		self.assertAlmostEqual(0.0, integrate(divergence(W, nu), nu), delta=1e-10)
		self.assertAlmostEqual(0.0, integrate(divergence(W)), delta=1e-10)

	def test_divergence_grid_mismatch(self):
		with self.assertRaises(StructuralError):
			divergence(VectorField.zeros(self.grid), Density.uniform(Grid((8, 8, 8))))

class TestInterpolation(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((8, 8))
		self.rng = np.random.default_rng(3)
		self.values = self.rng.standard_normal(self.grid.dims)

	def tearDown(self) -> None:
		del self.grid, self.rng, self.values

	def test_nodes(self):
		points = self.grid.points()
		for order in (1, 3):
			self.assertArrayClose(self.values.ravel(), PeriodicInterpolator(self.grid, self.values, order)(points),
								  atol=1e-10)

	def test_periodic(self):
		points = np.array([[1.0, 0.0], [-0.125, 2.0]])
		self.assertArrayClose([self.values[0, 0], self.values[7, 0]], sample(self.values, points, 1, self.grid),
							  atol=1e-12)

	def test_linear_midpoint(self):
		field = ScalarField(self.grid, self.values)
		midpoint = sample(field, np.array([[0.0625, 0.0]]), order=1)
		self.assertAlmostEqual(0.5 * (self.values[0, 0] + self.values[1, 0]), float(midpoint[0]), delta=1e-12)

	def test_channels(self):
		stacked = np.stack([self.values, 2 * self.values])
		out = PeriodicInterpolator(self.grid, stacked, 3)(np.array([[0.3, 0.7], [0.1, 0.05]]))
		self.assertEqual((2, 2), out.shape)
		self.assertArrayClose(2 * out[0], out[1], atol=1e-12)

	def test_smooth_accuracy(self):
		grid = Grid((32, 32))
		f = ScalarField.from_function(grid, lambda x, y: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))
		points = self.rng.uniform(0, 1, (50, 2))
		exact = np.sin(2 * np.pi * points[:, 0]) * np.cos(2 * np.pi * points[:, 1])
		self.assertArrayClose(exact, sample(f, points, order=3), atol=2e-4)
