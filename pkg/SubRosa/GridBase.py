"""
:Date: 02.10.2026

.. versionadded:: v0.1.0

Periodic grid geometry, field storage, quadrature and the basic differential operators every other module of
:py:mod:`SubRosa` is built from.

The reference volume :math:`\\mu` is the uniform probability volume on the torus, so the quadrature weight of every
node is ``1 / grid.size``. A :py:class:`Density` stores the ratio :math:`\\nu / \\mu`.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import logging
from numbers import Real
from typing import Union, AnyStr, Tuple, Optional, Sequence, Callable, Final, Literal, final, ClassVar

import numpy as np
from scipy import ndimage
from SEPModules.SEPPrinting import repr_string

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

AXIS_NAMES: Final[Tuple[str, ...]] = ("x", "y", "z")
""" Coordinate names of the axes, in storage order. """

StencilOrder: Final = Literal[2, 4]
""" Type alias for the supported orders of the central difference stencil. """

STENCILS: Final = {
		2: ((1, 1 / 2),),
		4: ((1, 8 / 12), (2, -1 / 12)),
		}
"""
Offset/weight pairs ``(o, c)`` of the antisymmetric central difference stencils, in units of ``1 / h``; each pair
stands for ``c * (u[j + o] - u[j - o])``.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ ERRORS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class SubRosaError(Exception):
	"""
	Exception base class for the :py:mod:`SubRosa` package. This error keeps track of the object which caused the
	error (see :py:attr:`obj` attribute). Every subclass carries the process exit code the command line maps it to.
	"""

	exit_code: ClassVar[int] = 1

	def __init__(self, msg: AnyStr, obj: object = None):
		super(SubRosaError, self).__init__(msg)
		self.msg = msg
		self.obj = obj

	def __str__(self) -> str:
		if self.obj is None:
			return str(self.msg)
		return f"{self.msg} (raised from {repr(self.obj)})"

@final
class StructuralError(SubRosaError):
	""" Raised for mismatched grids, wrong shapes, and non-finite field values. """
	exit_code = 3

@final
class ExpressionError(SubRosaError):
	"""
	Raised when an arithmetic expression fails to parse or evaluate.

	:param position: the character offset in the expression text at which the problem was found
	"""
	exit_code = 3

	def __init__(self, msg: AnyStr, obj: object = None, position: Optional[int] = None):
		super(ExpressionError, self).__init__(msg, obj)
		self.position = position

	def __str__(self) -> str:
		where = "" if self.position is None else f" at position {self.position}"
		return f"{self.msg}{where} in {self.obj!r}"

@final
class ConfigError(SubRosaError):
	""" Raised for unparsable configuration documents and for configuration values that fail validation. """
	exit_code = 3

@final
class DegenerateFrameError(SubRosaError):
	""" Raised when the vectors of a frame fail to be linearly independent at some node. """
	exit_code = 3

@final
class SolvabilityError(SubRosaError):
	""" Raised when a source violates the zero-mean condition, or two volumes to transport differ in mass. """
	exit_code = 4

@final
class ConvergenceError(SubRosaError):
	"""
	Raised when an iterative solver exhausts its iteration cap.

	:param residual: the relative residual reached when the solver gave up
	"""
	exit_code = 4

	def __init__(self, msg: AnyStr, obj: object = None, residual: float = float("nan")):
		super(ConvergenceError, self).__init__(msg, obj)
		self.residual = residual

@final
class IntegrationError(SubRosaError):
	""" Raised when a particle or ODE state stops being finite. """
	exit_code = 5

@final
class PositivityError(SubRosaError):
	"""
	Raised when a density ratio drops to or below the entropy floor.

	:param time: the evolution time at which positivity was lost, if any
	"""
	exit_code = 5

	def __init__(self, msg: AnyStr, obj: object = None, time: Optional[float] = None):
		super(PositivityError, self).__init__(msg, obj)
		self.time = time

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GRID ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class Grid:
	"""
	:py:class:`Grid` is a periodic rectangular lattice on the 2- or 3-torus. Node ``i`` along an axis sits at
	coordinate ``i * spacing``, which lies in ``[0, period)``. Field values are stored row-major with the last axis
	varying fastest.

	:param dims: the number of nodes per axis, each at least 4
	:param period: the period per axis, defaults to ``1.0`` on every axis

	:raise StructuralError: if the axis count is not 2 or 3, a dimension is below 4, or a period is not positive
	"""

	def __init__(self, dims: Sequence[int], period: Optional[Sequence[float]] = None):
		dims = tuple(int(d) for d in dims)
		period = (1.0,) * len(dims) if period is None else tuple(float(p) for p in period)

		if len(dims) not in (2, 3):
			raise StructuralError(f"Grid must have 2 or 3 axes, received {len(dims)}", dims)
		if len(period) != len(dims):
			raise StructuralError(f"Expected {len(dims)} periods, received {len(period)}", period)
		if any(d < 4 for d in dims):
			raise StructuralError(f"Every axis needs at least 4 nodes for the stencils, received {dims}", dims)
		if not all(np.isfinite(p) and p > 0 for p in period):
			raise StructuralError(f"Periods must be positive, received {period}", period)

		self._dims = dims
		self._period = period
		self._spacing = tuple(p / d for p, d in zip(period, dims))

	@property
	def dims(self) -> Tuple[int, ...]:
		""" :return: the number of nodes per axis """
		return self._dims

	@property
	def period(self) -> Tuple[float, ...]:
		""" :return: the period per axis """
		return self._period

	@property
	def spacing(self) -> Tuple[float, ...]:
		""" :return: the node spacing per axis, ``period / dims`` """
		return self._spacing

	@property
	def ndim(self) -> int:
		""" :return: the dimension of the torus """
		return len(self._dims)

	@property
	def size(self) -> int:
		""" :return: the total number of nodes """
		return int(np.prod(self._dims))

	@property
	def weight(self) -> float:
		""" :return: the quadrature weight of one node for the normalized reference volume """
		return 1.0 / self.size

	@property
	def axis_names(self) -> Tuple[str, ...]:
		return AXIS_NAMES[:self.ndim]

	def coordinates(self, axis: int) -> np.ndarray:
		""" :return: the one-dimensional node coordinates along ``axis`` """
		return np.arange(self._dims[axis]) * self._spacing[axis]

	def mesh(self) -> Tuple[np.ndarray, ...]:
		""" :return: one array of shape :py:attr:`dims` per axis, holding that coordinate of every node """
		return tuple(np.meshgrid(*(self.coordinates(a) for a in range(self.ndim)), indexing="ij"))

	def points(self) -> np.ndarray:
		""" :return: an array of shape ``(size, ndim)`` with the node coordinates in storage order """
		return np.stack([m.ravel() for m in self.mesh()], axis=-1)

	def wrap(self, points: np.ndarray) -> np.ndarray:
		""" :return: ``points`` (last axis = coordinates) reduced into the fundamental domain ``[0, period)`` """
		period = np.asarray(self._period)
		wrapped = np.mod(points, period)
		# np.mod can round a tiny negative coordinate up to exactly the period
		return np.where(wrapped >= period, wrapped - period, wrapped)

	def minimal_image(self, delta: np.ndarray) -> np.ndarray:
		""" :return: displacements ``delta`` (last axis = coordinates) mapped into ``[-period/2, period/2)`` """
		period = np.asarray(self._period)
		return np.mod(delta + 0.5 * period, period) - 0.5 * period

	def refined(self, factor: float) -> Grid:
		""" :return: a grid with the same periods and ``round(factor * dims)`` nodes per axis """
		return Grid([int(round(factor * d)) for d in self._dims], self._period)

	def __eq__(self, other) -> bool:
		return isinstance(other, Grid) and self._dims == other._dims and self._period == other._period

	def __hash__(self) -> int:
		return hash((self._dims, self._period))

	def __repr__(self) -> str:
		return repr_string(self, Grid.dims, Grid.period)

def require_same_grid(*objs: Union[Grid, ScalarField, VectorField, Density]) -> Grid:
	"""
	:return: the grid shared by all ``objs``
	:raise StructuralError: if two of the objects live on different grids
	"""
	grids = [o if isinstance(o, Grid) else o.grid for o in objs]
	for g in grids[1:]:
		if g != grids[0]:
			raise StructuralError(f"Grid mismatch: {grids[0]!r} and {g!r}", objs)
	return grids[0]

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FIELDS ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _frozen(array: np.ndarray) -> np.ndarray:
	array = np.array(array, dtype=np.float64, copy=True)
	array.setflags(write=False)
	return array

class ScalarField:
	"""
	:py:class:`ScalarField` is a real function sampled at the nodes of a :py:class:`Grid`. Instances are immutable;
	arithmetic returns new fields.

	:param grid: the grid the values are sampled on
	:param values: anything broadcastable to :py:attr:`Grid.dims`, or a flat row-major sequence of ``grid.size`` values

	:raise StructuralError: if the values have the wrong size or are not finite
	"""

	def __init__(self, grid: Grid, values: Union[np.ndarray, float]):
		values = np.asarray(values, dtype=np.float64)
		if values.ndim == 1 and values.size == grid.size and grid.ndim > 1:
			values = values.reshape(grid.dims)
		try:
			values = np.broadcast_to(values, grid.dims)
		except ValueError as ve:
			raise StructuralError(f"Cannot sample values of shape {values.shape} on {grid!r}", grid) from ve
		if not np.all(np.isfinite(values)):
			raise StructuralError("Scalar field values must be finite", grid)

		self._grid = grid
		self._values = _frozen(values)

	@staticmethod
	def from_function(grid: Grid, function: Callable[..., np.ndarray]) -> ScalarField:
		""" :return: ``function`` evaluated on the coordinate mesh of ``grid`` (one positional argument per axis) """
		return ScalarField(grid, function(*grid.mesh()))

	@staticmethod
	def zeros(grid: Grid) -> ScalarField:
		return ScalarField(grid, 0.0)

	@property
	def grid(self) -> Grid:
		return self._grid

	@property
	def values(self) -> np.ndarray:
		""" :return: the read-only node values, of shape :py:attr:`Grid.dims` """
		return self._values

	def mean(self, nu: Optional[Density] = None) -> float:
		""" :return: the ``nu``-weighted mean, which equals :py:func:`integrate` for a normalized density """
		return integrate(self, nu)

	def __binary_operation__(self, other: Union[ScalarField, Real], operator: Callable) -> ScalarField:
		if isinstance(other, ScalarField):
			require_same_grid(self, other)
			other = other._values
		elif not isinstance(other, Real):
			return NotImplemented
		return ScalarField(self._grid, operator(self._values, other))

	def __add__(self, other):
		return self.__binary_operation__(other, np.add)

	def __radd__(self, other):
		return self.__binary_operation__(other, np.add)

	def __sub__(self, other):
		return self.__binary_operation__(other, np.subtract)

	def __rsub__(self, other):
		return self.__binary_operation__(other, lambda a, b: b - a)

	def __mul__(self, other):
		return self.__binary_operation__(other, np.multiply)

	def __rmul__(self, other):
		return self.__binary_operation__(other, np.multiply)

	def __truediv__(self, other):
		return self.__binary_operation__(other, np.divide)

	def __neg__(self) -> ScalarField:
		return ScalarField(self._grid, -self._values)

	def __repr__(self) -> str:
		return repr_string(self, ScalarField.grid)

class VectorField:
	"""
	:py:class:`VectorField` stores ``n`` real components per node in the coordinate basis. A field may additionally
	carry the closed-form coefficient expressions it was sampled from (see :py:class:`.Expression`), which lets Lie
	brackets be formed symbolically.

	:param grid: the grid the components are sampled on
	:param components: an array of shape ``(ndim, *grid.dims)``
	:param expressions: keyword-only, the optional closed-form component expressions

	:raise StructuralError: if the component count differs from the grid dimension or values are not finite
	"""

	def __init__(self, grid: Grid, components: np.ndarray, *, expressions: Optional[Sequence] = None):
		components = np.asarray(components, dtype=np.float64)
		if components.shape[0] != grid.ndim:
			raise StructuralError(f"Expected {grid.ndim} components, received {components.shape[0]}", grid)
		try:
			components = np.broadcast_to(components, (grid.ndim, *grid.dims))
		except ValueError as ve:
			raise StructuralError(f"Cannot sample components of shape {components.shape} on {grid!r}", grid) from ve
		if not np.all(np.isfinite(components)):
			raise StructuralError("Vector field components must be finite", grid)
		if expressions is not None and len(expressions) != grid.ndim:
			raise StructuralError(f"Expected {grid.ndim} component expressions, received {len(expressions)}", grid)

		self._grid = grid
		self._components = _frozen(components)
		self._expressions = None if expressions is None else tuple(expressions)

	@staticmethod
	def zeros(grid: Grid) -> VectorField:
		return VectorField(grid, np.zeros((grid.ndim, *grid.dims)))

	@staticmethod
	def constant(grid: Grid, vector: Sequence[float]) -> VectorField:
		vector = np.asarray(vector, dtype=np.float64)
		return VectorField(grid, vector.reshape((grid.ndim,) + (1,) * grid.ndim))

	@property
	def grid(self) -> Grid:
		return self._grid

	@property
	def components(self) -> np.ndarray:
		""" :return: the read-only components, of shape ``(ndim, *dims)`` """
		return self._components

	@property
	def expressions(self) -> Optional[Tuple]:
		""" :return: the closed-form component expressions, or ``None`` if the field is plain grid data """
		return self._expressions

	def component(self, axis: int) -> ScalarField:
		return ScalarField(self._grid, self._components[axis])

	def dot(self, other: VectorField) -> ScalarField:
		""" :return: the pointwise inner product in the flat coordinate metric """
		require_same_grid(self, other)
		return ScalarField(self._grid, np.sum(self._components * other._components, axis=0))

	def __add__(self, other: VectorField) -> VectorField:
		require_same_grid(self, other)
		return VectorField(self._grid, self._components + other._components)

	def __sub__(self, other: VectorField) -> VectorField:
		require_same_grid(self, other)
		return VectorField(self._grid, self._components - other._components)

	def __mul__(self, other: Union[ScalarField, Real]) -> VectorField:
		if isinstance(other, ScalarField):
			require_same_grid(self, other)
			return VectorField(self._grid, self._components * other.values[np.newaxis])
		if isinstance(other, Real):
			return VectorField(self._grid, self._components * other)
		return NotImplemented

	__rmul__ = __mul__

	def __neg__(self) -> VectorField:
		return VectorField(self._grid, -self._components)

	def __repr__(self) -> str:
		return repr_string(self, VectorField.grid, VectorField.expressions)

class Density:
	"""
	:py:class:`Density` represents the volume form :math:`\\nu = \\text{ratio} \\cdot \\mu` through its ratio against the
	uniform reference volume :math:`\\mu`.

	:param grid: the grid the ratio is sampled on
	:param ratio: the positive node values of the ratio
	:param normalize: keyword-only argument, whether to rescale the ratio to total mass 1

	:raise PositivityError: if a ratio value is not strictly positive
	:raise StructuralError: if the ratio is not finite or has the wrong size
	"""

	def __init__(self, grid: Grid, ratio: Union[np.ndarray, float], *, normalize: bool = False):
		ratio = ScalarField(grid, ratio).values
		if not np.all(ratio > 0):
			raise PositivityError(f"Density ratio must be positive, minimum is {ratio.min():.3e}", grid)
		if normalize:
			ratio = ratio / np.mean(ratio)
		self._grid = grid
		self._ratio = _frozen(ratio)

	@staticmethod
	def uniform(grid: Grid) -> Density:
		""" :return: the reference volume itself """
		return Density(grid, 1.0)

	@staticmethod
	def from_field(field: ScalarField, *, normalize: bool = True) -> Density:
		return Density(field.grid, field.values, normalize=normalize)

	@property
	def grid(self) -> Grid:
		return self._grid

	@property
	def ratio(self) -> np.ndarray:
		""" :return: the read-only ratio values, of shape :py:attr:`Grid.dims` """
		return self._ratio

	@property
	def mass(self) -> float:
		""" :return: the total mass :math:`\\int \\text{ratio} \\, d\\mu` """
		return float(np.mean(self._ratio))

	@property
	def field(self) -> ScalarField:
		""" :return: the ratio as a :py:class:`ScalarField` """
		return ScalarField(self._grid, self._ratio)

	def normalized(self) -> Density:
		return Density(self._grid, self._ratio, normalize=True)

	def __repr__(self) -> str:
		return repr_string(self, Density.grid, Density.mass)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ QUADRATURE ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _weights(grid: Grid, nu: Optional[Density]) -> np.ndarray:
	if nu is None:
		return np.full(grid.dims, grid.weight)
	require_same_grid(grid, nu)
	return nu.ratio * grid.weight

def integrate(f: ScalarField, nu: Optional[Density] = None) -> float:
	"""
	Periodic midpoint (equivalently trapezoidal) quadrature :math:`\\sum f \\cdot \\text{ratio} \\cdot w` with the
	node weight ``w = 1 / size``. The rule is exact for trigonometric polynomials below the Nyquist degree.

	:param f: the integrand
	:param nu: the volume to integrate against, ``None`` for the reference volume

	:raise StructuralError: if ``f`` and ``nu`` live on different grids
	"""
	return float(np.sum(f.values * _weights(f.grid, nu)))

def inner_product(a: Union[ScalarField, VectorField], b: Union[ScalarField, VectorField],
				  nu: Optional[Density] = None) -> float:
	"""
	:return: the ``nu``-weighted :math:`L^2` pairing of two scalar fields, or of two vector fields in the flat
		coordinate metric
	"""
	require_same_grid(a, b)
	if isinstance(a, VectorField) and isinstance(b, VectorField):
		pointwise = np.sum(a.components * b.components, axis=0)
	elif isinstance(a, ScalarField) and isinstance(b, ScalarField):
		pointwise = a.values * b.values
	else:
		raise StructuralError("Cannot pair a scalar field with a vector field", (a, b))
	return float(np.sum(pointwise * _weights(a.grid, nu)))

def norm(f: Union[ScalarField, VectorField, np.ndarray], kind: Literal["l1", "l2", "linf"] = "l2",
		 nu: Optional[Density] = None, grid: Optional[Grid] = None) -> float:
	"""
	Quadrature norms of grid data. Vector fields use the pointwise Euclidean length.

	:param f: a field, or a raw array of shape ``grid.dims`` (then ``grid`` is required)
	:param kind: one of ``"l1"``, ``"l2"``, ``"linf"``
	:param nu: the weighting volume, ``None`` for the reference volume
	:param grid: the grid of a raw array
	"""
	if isinstance(f, VectorField):
		grid, values = f.grid, np.sqrt(np.sum(f.components ** 2, axis=0))
	elif isinstance(f, ScalarField):
		grid, values = f.grid, np.abs(f.values)
	else:
		if grid is None:
			raise StructuralError("A raw array needs its grid to be normed", f)
		values = np.abs(np.asarray(f, dtype=np.float64))
	if kind == "linf":
		return float(np.max(values))
	weights = _weights(grid, nu)
	if kind == "l1":
		return float(np.sum(values * weights))
	if kind == "l2":
		return float(np.sqrt(np.sum(values ** 2 * weights)))
	raise NotImplementedError(f"Norm {kind!r} is not known, choose from: l1, l2, and linf")

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ DIFFERENTIAL OPERATORS ~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def difference(values: np.ndarray, axis: int, h: float, order: StencilOrder = 4) -> np.ndarray:
	"""
	Periodic central difference of ``values`` along ``axis``. The stencil matrix is antisymmetric, so its transpose
	is its negative to round-off; :py:func:`divergence` relies on this.

	:param values: the node values
	:param axis: the array axis to differentiate along
	:param h: the node spacing along that axis
	:param order: the stencil order, ``2`` or ``4``
	"""
	try:
		stencil = STENCILS[order]
	except KeyError:
		raise NotImplementedError(f"Stencil order {order!r} is not known, choose from: 2, and 4") from None
	out = np.zeros_like(values)
	for offset, coefficient in stencil:
		# paired differences vanish exactly on constants
		out += coefficient * (np.roll(values, -offset, axis=axis) - np.roll(values, offset, axis=axis))
	return out / h

def grad(u: ScalarField, order: StencilOrder = 4) -> VectorField:
	"""
	Componentwise periodic central differences. Linear in ``u``; constants map to the zero field exactly.

	:param u: the field to differentiate
	:param order: the stencil order, defaults to the 4th-order stencil
	"""
	grid = u.grid
	return VectorField(grid, np.stack([difference(u.values, a, grid.spacing[a], order) for a in range(grid.ndim)]))

def divergence(W: VectorField, nu: Optional[Density] = None, order: StencilOrder = 4) -> ScalarField:
	"""
	The discrete divergence :math:`\\text{div}_\\nu W`, defined as the negative adjoint of :py:func:`grad` under the
	``nu``-weighted quadrature pairing:

	..	math:: \\langle \\text{div}_\\nu W, f \\rangle_\\nu = -\\langle W, \\nabla f \\rangle_\\nu

	Since the central stencil :math:`D` satisfies :math:`D^T = -D`, this is
	:math:`\\frac{1}{r} \\sum_k D_k (r W_k)` with ``r`` the density ratio. Its ``nu``-integral vanishes to round-off.

	:param W: the vector field
	:param nu: the volume, ``None`` for the reference volume
	:param order: the stencil order, must match the one :py:func:`grad` is used with

	:raise StructuralError: if ``W`` and ``nu`` live on different grids
	"""
	grid = W.grid
	if nu is None:
		ratio = None
	else:
		require_same_grid(W, nu)
		ratio = nu.ratio
	total = np.zeros(grid.dims)
	for a in range(grid.ndim):
		flux = W.components[a] if ratio is None else ratio * W.components[a]
		total += difference(flux, a, grid.spacing[a], order)
	return ScalarField(grid, total if ratio is None else total / ratio)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ INTERPOLATION ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class PeriodicInterpolator:
	"""
	Evaluates grid data at off-grid points with periodic B-spline interpolation (``order=1`` is linear, ``order=3``
	cubic). The spline coefficients are computed once at construction.

	:param grid: the grid the data lives on
	:param values: an array of shape ``grid.dims``, or ``(c, *grid.dims)`` for ``c`` channels
	:param order: the spline order
	"""

	def __init__(self, grid: Grid, values: np.ndarray, order: int = 3):
		values = np.asarray(values, dtype=np.float64)
		self._grid = grid
		self._order = order
		self._scalar = values.shape == grid.dims
		channels = values[np.newaxis] if self._scalar else values
		if order > 1:
			channels = np.stack([ndimage.spline_filter(c, order=order, mode="grid-wrap") for c in channels])
		self._coefficients = channels

	@property
	def order(self) -> int:
		return self._order

	def __call__(self, points: np.ndarray) -> np.ndarray:
		"""
		:param points: an array of shape ``(m, ndim)`` of torus coordinates, not necessarily wrapped
		:return: an array of shape ``(m,)``, or ``(c, m)`` for multi-channel data
		"""
		index = (np.asarray(points, dtype=np.float64) / np.asarray(self._grid.spacing)).T
		out = np.stack([ndimage.map_coordinates(c, index, order=self._order, mode="grid-wrap", prefilter=False)
						for c in self._coefficients])
		return out[0] if self._scalar else out

	def __repr__(self) -> str:
		return repr_string(self, PeriodicInterpolator.order)

def sample(f: Union[ScalarField, np.ndarray], points: np.ndarray, order: int = 1,
		   grid: Optional[Grid] = None) -> np.ndarray:
	""" :return: ``f`` interpolated at ``points`` with a periodic spline of the given order """
	if isinstance(f, ScalarField):
		grid, f = f.grid, f.values
	return PeriodicInterpolator(grid, f, order)(points)
