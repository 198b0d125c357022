"""
:Date: 17.10.2026

.. versionadded:: v0.1.0
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

import numpy as np

from SubRosa.Distribution import Frame
from SubRosa.FlowBase import FlowMap
from SubRosa.GridBase import Grid, Density, SolvabilityError, StructuralError, norm
from SubRosa.Moser import *
from SubRosa._test.test_GridBase import SubRosaUnitTest

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ UNIT TESTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class TestTransportReport(SubRosaUnitTest):

	def test_metrics(self):
		report = TransportReport(0.1, 0.2, 0.3, solves=((0.5, 7, 1e-9, 0.0), (1.0, 5, 1e-9, 0.0)), kernel="pullback")
		self.assertEqual(12, report.total_iterations)
		self.assertEqual("pullback", report.kernel)
		metrics = report.metrics()
		self.assertCollectionEquals(("l1_error", "l2_error", "linf_error", "renormalization", "monge_ampere",
									 "horizontality_residual", "action", "iterations"), metrics.keys())
		self.assertEqual(12.0, metrics["iterations"])
		self.assertEqual(0.2, metrics["l2_error"])

	def test_with_path(self):
		report = TransportReport(0.1, 0.2, 0.3).with_path(((0.5, 3, 1e-9, 0.0),), 1e-15, 0.25, ((0.5, 1, 2, 3),))
		self.assertEqual(0.1, report.l1_error)
		self.assertEqual(1e-15, report.horizontality_residual)
		self.assertEqual(0.25, report.action)
		self.assertEqual(1, len(report.checkpoints))
		self.assertEqual(3, report.total_iterations)

class TestSegment(SubRosaUnitTest):

	def test_segment_density(self):
		grid = Grid((8, 8))
		rng = np.random.default_rng(41)
		mu0, mu1 = self.random_density(grid, rng), self.random_density(grid, rng)
		self.assertArrayClose(mu0.ratio, segment_density(mu0, mu1, 0.0).ratio, atol=0)
		self.assertArrayClose(mu1.ratio, segment_density(mu0, mu1, 1.0).ratio, atol=1e-15)
		self.assertArrayClose(0.5 * (mu0.ratio + mu1.ratio), segment_density(mu0, mu1, 0.5).ratio, atol=1e-15)
		self.assertAlmostEqual(1.0, segment_density(mu0, mu1, 0.3).mass, delta=1e-14)

class TestVerifyTransport(SubRosaUnitTest):

	def test_identity(self):
		grid = Grid((8, 8))
		mu = self.random_density(grid, np.random.default_rng(43))
		report = verify_transport(FlowMap.identity(grid), mu, mu)
		self.assertAlmostEqual(0.0, report.l2_error, delta=1e-12)
		self.assertAlmostEqual(0.0, report.linf_error, delta=1e-12)
		self.assertAlmostEqual(0.0, report.monge_ampere, delta=1e-12)
		self.assertAlmostEqual(0.0, report.renormalization, delta=1e-12)

	def test_grid_mismatch(self):
		grid = Grid((8, 8))
		with self.assertRaises(StructuralError):
			verify_transport(FlowMap.identity(grid), Density.uniform(grid), Density.uniform(Grid((4, 4))))

class TestMoserFlat(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((16, 16))
		self.frame = Frame.flat(self.grid)
		self.mu0 = Density.uniform(self.grid)
		x, y = self.grid.mesh()
		self.mu1 = Density(self.grid, 1 + 0.2 * np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y), normalize=True)

	def tearDown(self) -> None:
		del self.grid, self.frame, self.mu0, self.mu1

	def test_same_density(self):
		flow, report = moser_flow(self.mu0, self.mu0, self.frame, 4)
		self.assertArrayClose(self.grid.points(), flow.positions, atol=0)
		self.assertEqual(0, report.total_iterations)
		self.assertEqual(0.0, report.action)
		self.assertAlmostEqual(0.0, report.l2_error, delta=1e-12)

	def test_transport(self):
		initial = norm(self.mu1.field - self.mu0.field)
		for kernel in ("scatter", "pullback"):
			flow, report = moser_flow(self.mu0, self.mu1, self.frame, 8, kernel=kernel)
			self.assertEqual(1.0, flow.t_final)
			self.assertEqual(8, len(report.solves))
			self.assertLessEqual(report.l2_error, 0.2 * initial, msg=kernel)
			self.assertLessEqual(report.horizontality_residual, 1e-12)
			self.assertGreater(report.action, 0.0)
			for _, _, residual, _ in report.solves:
				self.assertLessEqual(residual, 1e-8)

	def test_stage_solves(self):
		_, plain = moser_flow(self.mu0, self.mu1, self.frame, 2)
		self.assertCollectionEquals((0.25, 0.75), tuple(s[0] for s in plain.solves))
		_, staged = moser_flow(self.mu0, self.mu1, self.frame, 2, stage_solves=True)
		self.assertCollectionEquals((0.0, 0.25, 0.5, 0.75, 1.0), sorted(s[0] for s in staged.solves))

	def test_checkpoints_and_stop(self):
		flow, report = moser_flow(self.mu0, self.mu1, self.frame, 4, checkpoints=(0.5,), t_stop=0.5)
		self.assertEqual(0.5, flow.t_final)
		self.assertEqual(2, len(report.solves))
		self.assertEqual(1, len(report.checkpoints))
		t, l1, l2, linf = report.checkpoints[0]
		self.assertEqual(0.5, t)
		self.assertLessEqual(l1, l2 + 1e-15)
		self.assertLessEqual(l2, linf + 1e-15)

	def test_truncated_flow(self):
		_, half = moser_flow(self.mu0, self.mu1, self.frame, 4, checkpoints=(0.5,), t_stop=0.5)
		gap = norm(segment_density(self.mu0, self.mu1, 0.5).field - self.mu1.field)
		_, _, discretization, _ = half.checkpoints[0]
		self.assertLessEqual(discretization, 0.25 * gap)
		# the pushforward at t=0.5 is within its discretization error of the segment density
		self.assertGreaterEqual(half.l2_error, gap - discretization - 1e-14)
		self.assertLessEqual(half.l2_error, gap + discretization + 1e-14)

	def test_threads(self):
		single, _ = moser_flow(self.mu0, self.mu1, self.frame, 2, threads=1)
		chunked, _ = moser_flow(self.mu0, self.mu1, self.frame, 2, threads=4)
		self.assertArrayClose(single.positions, chunked.positions, atol=1e-14)
		self.assertArrayClose(single.log_jacobian, chunked.log_jacobian, atol=1e-14)

	def test_errors(self):
		with self.assertRaises(SolvabilityError):
			moser_flow(self.mu0, Density(self.grid, 1.1), self.frame, 4)
		with self.assertRaises(ValueError):
			moser_flow(self.mu0, self.mu1, self.frame, 0)
		with self.assertRaises(StructuralError):
			moser_flow(self.mu0, Density.uniform(Grid((8, 8))), self.frame, 4)

class TestMoserSinHeisenberg(SubRosaUnitTest):

	def test_vertical_target(self):
		grid = Grid((8, 8, 8))
		frame = Frame.sin_heisenberg(grid)
		mu0 = Density.uniform(grid)
		z = grid.mesh()[2]
		mu1 = Density(grid, 1 + 0.2 * np.cos(2 * np.pi * z), normalize=True)

		flow, report = moser_flow(mu0, mu1, frame, 4, preconditioned=True)
		self.assertTrue(np.all(np.isfinite(flow.log_jacobian)))
		self.assertLessEqual(report.horizontality_residual, 1e-12)
		self.assertLessEqual(report.l2_error, 0.4 * norm(mu1.field - mu0.field))

class TestClassicalLimit(SubRosaUnitTest):

	def setUp(self) -> None:
		self.grid = Grid((16, 16, 4))
		self.mu0 = Density.uniform(self.grid)
		x, y, _ = self.grid.mesh()
		self.mu1 = Density(self.grid, 1 + 0.3 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), normalize=True)

	def tearDown(self) -> None:
		del self.grid, self.mu0, self.mu1

	def test_flat_and_nonholonomic_agree(self):
		_, flat = moser_flow(self.mu0, self.mu1, Frame.flat(self.grid), 4)
		_, sin_heisenberg = moser_flow(self.mu0, self.mu1, Frame.sin_heisenberg(self.grid), 4)
		self.assertGreater(flat.l2_error, 0.0)
		self.assertLessEqual(sin_heisenberg.l2_error, 2 * flat.l2_error)
		self.assertLessEqual(flat.l2_error, 2 * sin_heisenberg.l2_error)
		# a z-constant target: both frames solve the same discrete problem and shift whole columns vertically
		self.assertRelativeError(sin_heisenberg.l2_error, flat.l2_error, 1e-6)
		self.assertLessEqual(flat.horizontality_residual, 1e-12)
		self.assertLessEqual(sin_heisenberg.horizontality_residual, 1e-12)
