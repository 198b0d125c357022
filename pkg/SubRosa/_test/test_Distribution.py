"""
:Date: 16.10.2026

.. versionadded:: v0.1.0
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

import numpy as np
import sympy

from SubRosa.Distribution import *
from SubRosa.Expression import Expression, SYMBOLS
from SubRosa.GridBase import Grid, ScalarField, VectorField, StructuralError, DegenerateFrameError, grad
from SubRosa._test.test_GridBase import SubRosaUnitTest

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ UNIT TESTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

ROTATED = [("cos(sin(2*pi*z))", "sin(sin(2*pi*z))", "0"), ("-sin(sin(2*pi*z))", "cos(sin(2*pi*z))", "0")]
""" A rank 2 frame that is orthonormal in the ambient metric and rotates with ``z``. """

class TestFrame(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((8, 8, 8))
		self.frame = Frame.sin_heisenberg(self.grid)

	def tearDown(self) -> None:
		del self.grid, self.frame

	def test_init(self):
		self.assertEqual("sin-heisenberg", self.frame.name)
		self.assertEqual(2, self.frame.rank)
		self.assertEqual(self.grid, self.frame.grid)
		self.assertEqual((2, 3, 8, 8, 8), self.frame.coefficients.shape)
		self.assertFalse(self.frame.coefficients.flags.writeable)
		self.assertEqual(2, len(self.frame.fields))
		self.assertIsNotNone(self.frame.fields[1].expressions)
		x = self.grid.mesh()[0]
		self.assertArrayClose(np.sin(2 * np.pi * x), self.frame.coefficients[1, 2], atol=1e-15)
		self.assertEqual(self.frame, Frame.builtin("Sin-Heisenberg", self.grid))
		self.assertNotEqual(self.frame, Frame.flat(self.grid))

	def test_init_errors(self):
		with self.assertRaises(StructuralError):
			Frame.sin_heisenberg(Grid((8, 8)))
		with self.assertRaises(NotImplementedError):
			Frame.builtin("engel", self.grid)
		with self.assertRaises(StructuralError):
			Frame(self.grid, [("1", "0")])
		with self.assertRaises(StructuralError):
			Frame(self.grid, [])
		with self.assertRaises(DegenerateFrameError):
			Frame(self.grid, [("1", "0", "0"), ("2", "0", "0")])
		with self.assertRaises(DegenerateFrameError):
			Frame(self.grid, [("sin(2*pi*x)", "0", "0")])

	def test_gram(self):
		gram = Frame.flat(self.grid).gram()
		self.assertEqual((8, 8, 8, 3, 3), gram.shape)
		self.assertArrayClose(np.broadcast_to(np.eye(3), gram.shape), gram, atol=0)
		x = self.grid.mesh()[0]
		self.assertArrayClose(1 + np.sin(2 * np.pi * x) ** 2, self.frame.gram()[..., 1, 1], atol=1e-15)

	def test_evaluate(self):
		points = np.array([[0.25, 0.0, 0.0], [0.1, 0.3, 0.7]])
		values = self.frame.evaluate(points)
		self.assertEqual((2, 3, 2), values.shape)
		self.assertArrayClose([1.0, np.sin(0.2 * np.pi)], values[1, 2], atol=1e-15)
		jacobian = self.frame.jacobian(points)
		self.assertEqual((2, 3, 3, 2), jacobian.shape)
		self.assertArrayClose(2 * np.pi * np.cos(2 * np.pi * points[:, 0]), jacobian[1, 2, 0], atol=1e-14)
		self.assertArrayClose(np.zeros(2), jacobian[0, 0, 0], atol=0)

class TestProjection(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((8, 8, 8))
		self.frame = Frame.sin_heisenberg(self.grid)
		self.rng = np.random.default_rng(5)

	def tearDown(self) -> None:
		del self.grid, self.frame, self.rng

	def test_project_idempotent(self):
		W = VectorField(self.grid, self.rng.standard_normal((3, *self.grid.dims)))
		once = project_tau(W, self.frame)
		self.assertArrayClose(once.components, project_tau(once, self.frame).components, atol=1e-12)
		# the residual is orthogonal to every frame vector
		residual = (W - once).components
		for X in self.frame.coefficients:
			self.assertArrayClose(np.zeros(self.grid.dims), np.sum(X * residual, axis=0), atol=1e-12)

	def test_project_frame_vectors(self):
		for X in self.frame.fields:
			self.assertArrayClose(X.components, project_tau(X, self.frame).components, atol=1e-12)

	def test_project_grid_mismatch(self):
		with self.assertRaises(StructuralError):
			project_tau(VectorField.zeros(Grid((4, 4, 4))), self.frame)

	def test_horizontal_gradient(self):
		u = ScalarField.from_function(self.grid, lambda x, y, z: np.cos(2 * np.pi * y) * np.sin(2 * np.pi * z))
		coefficients = horizontal_coefficients(u, self.frame)
		self.assertEqual((2, 8, 8, 8), coefficients.shape)
		gradient = grad(u).components
		self.assertArrayClose(gradient[0], coefficients[0], atol=0)
		self.assertArrayClose(gradient[1] + self.frame.coefficients[1, 2] * gradient[2], coefficients[1], atol=1e-13)

		H = horizontal_gradient(u, self.frame)
		self.assertArrayClose(H.components, project_tau(H, self.frame).components, atol=1e-11)
		with self.assertRaises(NotImplementedError):
			horizontal_gradient(u, self.frame, method="adjoint")

	def test_frame_projection_agree(self):
		u = ScalarField(self.grid, self.rng.standard_normal(self.grid.dims))
		for frame in (Frame.flat(self.grid), Frame(self.grid, ROTATED, name="rotated")):
			by_frame = horizontal_gradient(u, frame, "frame")
			by_projection = horizontal_gradient(u, frame, "projection")
			self.assertArrayClose(by_frame.components, by_projection.components, atol=1e-11)

	def test_horizontal_field(self):
		coefficients = random_horizontal_coefficients(self.frame, np.random.default_rng(1), max_mode=1)
		self.assertEqual((2, 8, 8, 8), coefficients.shape)
		again = random_horizontal_coefficients(self.frame, np.random.default_rng(1), max_mode=1)
		self.assertArrayClose(coefficients, again, atol=0)

		W = horizontal_field(self.frame, coefficients)
		self.assertArrayClose(W.components, project_tau(W, self.frame).components, atol=1e-12)
		self.assertArrayClose(coefficients[0], W.components[0], atol=0)
		with self.assertRaises(StructuralError):
			horizontal_field(self.frame, coefficients[:1])

class TestBrackets(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((32, 8, 8))
		self.frame = Frame.sin_heisenberg(self.grid)

	def tearDown(self) -> None:
		del self.grid, self.frame

	def test_symbolic_bracket(self):
		X, Y = self.frame.expressions
		B = symbolic_bracket(X, Y)
		self.assertTrue(B[0].is_zero)
		self.assertTrue(B[1].is_zero)
		self.assertEqual(Expression.parse("2*pi*cos(2*pi*x)"), B[2])
		self.assertEqual(sympy.Integer(0), sympy.simplify(symbolic_bracket(X, X)[2].tree))
		self.assertEqual(Expression.from_sympy(-B[2].tree), symbolic_bracket(Y, X)[2])
		self.assertIn(SYMBOLS[0], B[2].tree.free_symbols)

	def test_bracket_symbolic_path(self):
		X, Y = self.frame.fields
		B = bracket(X, Y)
		self.assertIsNotNone(B.expressions)
		x = self.grid.mesh()[0]
		self.assertArrayClose(2 * np.pi * np.cos(2 * np.pi * x), B.components[2], atol=1e-12)
		self.assertArrayClose(np.zeros((2, *self.grid.dims)), B.components[:2], atol=0)

	def test_bracket_stencil_path(self):
		X, Y = (VectorField(self.grid, f.components) for f in self.frame.fields)
		B = bracket(X, Y)
		self.assertIsNone(B.expressions)
		x = self.grid.mesh()[0]
		self.assertArrayClose(2 * np.pi * np.cos(2 * np.pi * x), B.components[2], atol=2 * np.pi * 1e-4)

class TestGrowth(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((8, 8, 8))
		self.points = np.array([[0.0, 0.0, 0.0], [0.25, 0.0, 0.0], [0.75, 0.5, 0.5], [0.1, 0.2, 0.3]])

	def tearDown(self) -> None:
		del self.grid, self.points

	def test_sin_heisenberg(self):
		report = check_bracket_generating(Frame.sin_heisenberg(self.grid), 3, self.points)
		self.assertEqual(3, report.max_depth)
		self.assertTrue(report.bracket_generating)
		self.assertEqual(3, report.max_depth_needed)
		self.assertCollectionEquals((2, 3, 3, 2), report.depth_needed)
		self.assertCollectionEquals((2, 3), report.growth_vector(0))
		self.assertCollectionEquals((2, 2, 3), report.growth_vector(1))
		self.assertCollectionEquals((2, 2, 3), report.growth_vector(2))
		self.assertTrue(np.all(np.diff(report.growth, axis=1) >= 0))

	def test_depth_too_small(self):
		report = check_bracket_generating(Frame.sin_heisenberg(self.grid), 2, self.points)
		self.assertFalse(report.bracket_generating)
		self.assertEqual(0, report.max_depth_needed)
		self.assertCollectionEquals((2, 2), report.growth_vector(1))

	def test_flat(self):
		report = check_bracket_generating(Frame.flat(self.grid), 2)
		self.assertEqual(self.grid.size, report.points.shape[0])
		self.assertTrue(report.bracket_generating)
		self.assertEqual(1, report.max_depth_needed)
		self.assertCollectionEquals((3,), report.growth_vector(5))

	def test_not_generating(self):
		frame = Frame(self.grid, [("1", "0", "0"), ("0", "1", "0")])
		report = check_bracket_generating(frame, 3, self.points)
		self.assertFalse(report.bracket_generating)
		self.assertEqual(0, report.max_depth_needed)
		self.assertCollectionEquals((2, 2, 2), report.growth_vector(3))

	def test_errors(self):
		with self.assertRaises(ValueError):
			check_bracket_generating(Frame.flat(self.grid), 0)
