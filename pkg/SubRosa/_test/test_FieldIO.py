"""
:Date: 18.10.2026

.. versionadded:: v0.1.0
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

import os.path
import struct
import tempfile

import numpy as np

from SubRosa.FieldIO import *
from SubRosa.FlowBase import FlowMap
from SubRosa.GridBase import Grid, ScalarField, VectorField, StructuralError
from SubRosa._test.test_GridBase import SubRosaUnitTest

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ UNIT TESTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class FileTestCase(SubRosaUnitTest):

	def setUp(self) -> None:
		self.directory = tempfile.TemporaryDirectory()
		self.grid = Grid((4, 3), (1.0, 2.0))
		self.rng = np.random.default_rng(83)

	def tearDown(self) -> None:
		self.directory.cleanup()
		del self.directory, self.grid, self.rng

	def path(self, name: str) -> str:
		return os.path.join(self.directory.name, name)

class TestFieldFiles(FileTestCase):

	def test_scalar_layout(self):
		field = ScalarField(self.grid, np.arange(12, dtype=float).reshape(4, 3))
		write_field(self.path("u.bin"), field)
		with open(self.path("u.bin"), "rb") as stream:
			data = stream.read()
		self.assertEqual(b"SRFLD1", data[:6])
		self.assertEqual((2, 4, 3), struct.unpack("<3I", data[6:18]))
		self.assertEqual((1.0, 2.0), struct.unpack("<2d", data[18:34]))
		self.assertEqual((1,), struct.unpack("<I", data[34:38]))
		self.assertEqual(38 + 8 * 12, len(data))
		self.assertEqual((0.0, 1.0, 2.0), struct.unpack("<3d", data[38:62]))

		read = read_scalar_field(self.path("u.bin"), self.grid)
		self.assertEqual(self.grid, read.grid)
		self.assertArrayClose(field.values, read.values, atol=0)

	def test_vector_component_order(self):
		field = VectorField(self.grid, self.rng.standard_normal((2, 4, 3)))
		write_field(self.path("w.bin"), field)
		with open(self.path("w.bin"), "rb") as stream:
			stream.seek(38)
			first = struct.unpack("<2d", stream.read(16))
		# the component index varies fastest
		self.assertEqual((field.components[0, 0, 0], field.components[1, 0, 0]), first)

		read = read_field(self.path("w.bin"))
		self.assertIsInstance(read, VectorField)
		self.assertArrayClose(field.components, read.components, atol=0)

	def test_errors(self):
		with open(self.path("bad.bin"), "wb") as stream:
			stream.write(b"SRFLW1" + struct.pack("<I", 2))
		with self.assertRaises(StructuralError):
			read_field(self.path("bad.bin"))

		write_field(self.path("u.bin"), ScalarField(self.grid, np.ones((4, 3))))
		with open(self.path("u.bin"), "rb") as stream:
			data = stream.read()
		with open(self.path("short.bin"), "wb") as stream:
			stream.write(data[:-8])
		with self.assertRaises(StructuralError):
			read_field(self.path("short.bin"))
		with open(self.path("long.bin"), "wb") as stream:
			stream.write(data + b"\x00")
		with self.assertRaises(StructuralError):
			read_field(self.path("long.bin"))
		with open(self.path("components.bin"), "wb") as stream:
			stream.write(data[:34] + struct.pack("<I", 5) + data[38:])
		with self.assertRaises(StructuralError):
			read_field(self.path("components.bin"))

		with self.assertRaises(StructuralError):
			read_scalar_field(self.path("u.bin"), Grid((4, 3)))
		write_field(self.path("w.bin"), VectorField.zeros(self.grid))
		with self.assertRaises(StructuralError):
			read_scalar_field(self.path("w.bin"), self.grid)

class TestFlowFiles(FileTestCase):

	def test_flow(self):
		positions = self.grid.points() + 0.01 * self.rng.standard_normal((12, 2))
		flow = FlowMap(self.grid, positions, self.rng.standard_normal(12), 0.75)
		write_flow(self.path("phi.bin"), flow)
		self.assertEqual(6 + 4 + 8 + 16 + 8 + 8 * 24 + 8 * 12, os.path.getsize(self.path("phi.bin")))
		read = read_flow(self.path("phi.bin"))
		self.assertEqual(0.75, read.t_final)
		self.assertArrayClose(flow.positions, read.positions, atol=0)
		self.assertArrayClose(flow.log_jacobian, read.log_jacobian, atol=0)

		write_field(self.path("u.bin"), ScalarField(self.grid, np.ones((4, 3))))
		with self.assertRaises(StructuralError):
			read_flow(self.path("u.bin"))

class TestTables(FileTestCase):

	def test_field_csv(self):
		u = ScalarField(self.grid, self.rng.standard_normal((4, 3)))
		w = VectorField(self.grid, self.rng.standard_normal((2, 4, 3)))
		write_field_csv(self.path("fields.csv"), {"u": u, "w": w})
		header, values = read_table(self.path("fields.csv"))
		self.assertCollectionEquals(("x", "y", "u", "w_x", "w_y"), header)
		self.assertEqual((12, 5), values.shape)
		self.assertArrayClose(self.grid.points(), values[:, :2], atol=0)
		self.assertArrayClose(u.values.ravel(), values[:, 2], atol=0)
		self.assertArrayClose(w.components[1].ravel(), values[:, 4], atol=0)

	def test_field_csv_errors(self):
		with self.assertRaises(StructuralError):
			write_field_csv(self.path("empty.csv"), {})
		with self.assertRaises(StructuralError):
			write_field_csv(self.path("mixed.csv"), {"u": ScalarField(self.grid, np.ones((4, 3))),
													 "v": ScalarField(Grid((4, 3)), np.ones((4, 3)))})

	def test_residual_history(self):
		write_residual_history(self.path("history.csv"), [1.0, 0.5, 1e-9])
		header, values = read_table(self.path("history.csv"))
		self.assertCollectionEquals(("iteration", "residual"), header)
		self.assertArrayClose([[0, 1.0], [1, 0.5], [2, 1e-9]], values, atol=0)
