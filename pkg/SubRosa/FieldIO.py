"""
:Date: 12.10.2026

.. versionadded:: v0.1.0

Reading and writing grid data. Binary files are little-endian and self-describing ::

	field file "SRFLD1":  magic[6] | uint32 ndim | uint32 dims[ndim] | float64 period[ndim] | uint32 components
	                      | float64 values, row-major with the component index varying fastest
	flow file  "SRFLW1":  magic[6] | uint32 ndim | uint32 dims[ndim] | float64 period[ndim] | float64 t_final
	                      | float64 positions[size][ndim] | float64 log_jacobian[size]

CSV exports carry a header row with the coordinate names followed by the value columns, one row per node in storage
order, so they load directly into plotting tools.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import csv
import logging
import struct
from os import PathLike
from typing import Union, Tuple, Sequence, Final, Mapping, BinaryIO

import numpy as np

from SubRosa.FlowBase import FlowMap
from SubRosa.GridBase import Grid, ScalarField, VectorField, StructuralError

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

FIELD_MAGIC: Final[bytes] = b"SRFLD1"
FLOW_MAGIC: Final[bytes] = b"SRFLW1"

Path: Final = Union[str, PathLike]

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ BINARY HEADER ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _write_header(stream: BinaryIO, magic: bytes, grid: Grid) -> None:
	stream.write(magic)
	stream.write(struct.pack("<I", grid.ndim))
	stream.write(struct.pack(f"<{grid.ndim}I", *grid.dims))
	stream.write(struct.pack(f"<{grid.ndim}d", *grid.period))

def _read(stream: BinaryIO, size: int, path: Path) -> bytes:
	data = stream.read(size)
	if len(data) != size:
		raise StructuralError(f"Unexpected end of file, expected {size} more bytes", str(path))
	return data

def _read_header(stream: BinaryIO, magic: bytes, path: Path) -> Grid:
	found = _read(stream, len(magic), path)
	if found != magic:
		raise StructuralError(f"Not a {magic.decode()} file, found magic {found!r}", str(path))
	ndim, = struct.unpack("<I", _read(stream, 4, path))
	if ndim not in (2, 3):
		raise StructuralError(f"Unsupported axis count {ndim}", str(path))
	dims = struct.unpack(f"<{ndim}I", _read(stream, 4 * ndim, path))
	period = struct.unpack(f"<{ndim}d", _read(stream, 8 * ndim, path))
	return Grid(dims, period)

def _read_array(stream: BinaryIO, count: int, path: Path) -> np.ndarray:
	return np.frombuffer(_read(stream, 8 * count, path), dtype="<f8").astype(np.float64)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FIELD FILES ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def write_field(path: Path, field: Union[ScalarField, VectorField]) -> None:
	""" Writes a scalar or vector field as an ``SRFLD1`` file. """
	grid = field.grid
	if isinstance(field, VectorField):
		# (*dims, ndim): component index fastest
		data = np.moveaxis(field.components, 0, -1)
		components = grid.ndim
	else:
		data, components = field.values, 1
	with open(path, "wb") as stream:
		_write_header(stream, FIELD_MAGIC, grid)
		stream.write(struct.pack("<I", components))
		stream.write(np.ascontiguousarray(data, dtype="<f8").tobytes())
	logger.debug("Wrote %s", path)

def read_field(path: Path) -> Union[ScalarField, VectorField]:
	"""
	:return: a :py:class:`.ScalarField` for one component, a :py:class:`.VectorField` for ``ndim`` components
	:raise StructuralError: on a malformed file or a component count other than 1 or ``ndim``
	"""
	with open(path, "rb") as stream:
		grid = _read_header(stream, FIELD_MAGIC, path)
		components, = struct.unpack("<I", _read(stream, 4, path))
		if components not in (1, grid.ndim):
			raise StructuralError(f"Unsupported component count {components}", str(path))
		data = _read_array(stream, grid.size * components, path)
		if stream.read(1):
			raise StructuralError("Trailing data after field values", str(path))
	if components == 1:
		return ScalarField(grid, data.reshape(grid.dims))
	return VectorField(grid, np.moveaxis(data.reshape((*grid.dims, components)), -1, 0))

def read_scalar_field(path: Path, grid: Grid) -> ScalarField:
	"""
	:return: the scalar field stored at ``path``
	:raise StructuralError: if the file holds a vector field or lives on a grid other than ``grid``
	"""
	field = read_field(path)
	if not isinstance(field, ScalarField):
		raise StructuralError("Expected a scalar field file", str(path))
	if field.grid != grid:
		raise StructuralError(f"Field file lives on {field.grid!r}, expected {grid!r}", str(path))
	return field

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FLOW FILES ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def write_flow(path: Path, flow: FlowMap) -> None:
	""" Writes the positions and log-Jacobians of a flow map as an ``SRFLW1`` file. """
	with open(path, "wb") as stream:
		_write_header(stream, FLOW_MAGIC, flow.grid)
		stream.write(struct.pack("<d", flow.t_final))
		stream.write(np.ascontiguousarray(flow.positions, dtype="<f8").tobytes())
		stream.write(np.ascontiguousarray(flow.log_jacobian, dtype="<f8").tobytes())
	logger.debug("Wrote %s", path)

def read_flow(path: Path) -> FlowMap:
	""" :raise StructuralError: on a malformed file """
	with open(path, "rb") as stream:
		grid = _read_header(stream, FLOW_MAGIC, path)
		t_final, = struct.unpack("<d", _read(stream, 8, path))
		positions = _read_array(stream, grid.size * grid.ndim, path).reshape((grid.size, grid.ndim))
		log_jacobian = _read_array(stream, grid.size, path)
	return FlowMap(grid, positions, log_jacobian, t_final)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ CSV ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def write_field_csv(path: Path, fields: Mapping[str, Union[ScalarField, VectorField]]) -> None:
	"""
	Writes fields sharing one grid as CSV: the node coordinates, then one column per scalar field and ``ndim``
	columns per vector field (named ``<name>_<axis>``).

	:raise StructuralError: if the fields live on different grids or none are given
	"""
	if not fields:
		raise StructuralError("Nothing to write", str(path))
	grid = next(iter(fields.values())).grid
	header = list(grid.axis_names)
	columns = [grid.points()[:, a] for a in range(grid.ndim)]
	for name, field in fields.items():
		if field.grid != grid:
			raise StructuralError(f"Field {name!r} lives on a different grid", field)
		if isinstance(field, VectorField):
			header.extend(f"{name}_{axis}" for axis in grid.axis_names)
			columns.extend(c.ravel() for c in field.components)
		else:
			header.append(name)
			columns.append(field.values.ravel())
	write_table(path, header, np.stack(columns, axis=-1))

def write_table(path: Path, header: Sequence[str], rows: Union[np.ndarray, Sequence[Sequence[float]]]) -> None:
	""" Writes a CSV table with a header row, numbers in full ``repr`` precision. """
	with open(path, "w", newline="") as stream:
		writer = csv.writer(stream)
		writer.writerow(header)
		for row in rows:
			writer.writerow([repr(float(v)) for v in row])
	logger.debug("Wrote %s", path)

def read_table(path: Path) -> Tuple[Tuple[str, ...], np.ndarray]:
	""" :return: the header and the values of a CSV table written by :py:func:`write_table` """
	with open(path, "r", newline="") as stream:
		reader = csv.reader(stream)
		header = tuple(next(reader))
		rows = [[float(v) for v in row] for row in reader if row]
	return header, np.asarray(rows, dtype=np.float64).reshape((-1, len(header)))

def write_residual_history(path: Path, history: Sequence[float]) -> None:
	""" Writes a solver residual history as ``iteration, residual`` rows. """
	write_table(path, ("iteration", "residual"), [(i, r) for i, r in enumerate(history)])
