"""
:Date: 04.10.2026

.. versionadded:: v0.1.0

The bracket-generating distribution :math:`\\tau`, represented by a horizontal frame :math:`X_1, \\dots, X_k` that
is declared orthonormal for the subriemannian metric. Provides the projection :math:`P^\\tau`, the horizontal
gradient, Lie brackets and a growth-vector check of the bracket-generating condition.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import logging
from typing import Sequence, Tuple, Union, Optional, Literal, Final, List, final

import numpy as np
import sympy
from SEPModules.SEPPrinting import repr_string

from SubRosa.Expression import Expression, SYMBOLS
from SubRosa.GridBase import Grid, ScalarField, VectorField, StructuralError, DegenerateFrameError, \
	require_same_grid, grad, difference, StencilOrder

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

GRAM_TOLERANCE: Final[float] = 1e-10
""" Smallest admissible Gram determinant of a frame at any node. """

RANK_THRESHOLD: Final[float] = 1e-8
""" Singular values above this threshold count towards the rank in the growth check. """

BUILTIN_FRAMES: Final[Tuple[str, ...]] = ("flat", "sin-heisenberg")
""" Names accepted by :py:meth:`Frame.builtin`. """

ExpressionLike: Final = Union[str, Expression, float, int]
""" Anything :py:class:`Frame` accepts as a coefficient. """

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FRAME ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _as_expression(e: ExpressionLike) -> Expression:
	if isinstance(e, Expression):
		return e
	if isinstance(e, str):
		return Expression.parse(e)
	return Expression.from_sympy(e)

@final
class Frame:
	"""
	:py:class:`Frame` holds ``k`` horizontal vector fields given by closed-form coefficient expressions in the
	coordinate basis. The frame spans the distribution :math:`\\tau` and is, by declaration, orthonormal for the
	subriemannian metric. Frames are immutable.

	Example: the step-3 frame shipped as ``"sin-heisenberg"`` on the 3-torus is ::

		Frame(grid, [("1", "0", "0"), ("0", "1", "sin(2*pi*x)")], name="sin-heisenberg")

	:param grid: the grid the frame is sampled on
	:param vectors: ``k`` sequences of ``ndim`` coefficient expressions each
	:param name: a label for reports

	:raise StructuralError: if ``k`` is not in ``[1, ndim]`` or a vector has the wrong length
	:raise ExpressionError: if a coefficient fails to parse or uses a coordinate the grid lacks
	:raise DegenerateFrameError: if the Gram determinant drops to :py:data:`GRAM_TOLERANCE` or below at a node
	"""

	def __init__(self, grid: Grid, vectors: Sequence[Sequence[ExpressionLike]], name: str = "custom"):
		n = grid.ndim
		if not 1 <= len(vectors) <= n:
			raise StructuralError(f"A frame on a {n}-torus needs between 1 and {n} vectors, received {len(vectors)}",
								  vectors)
		expressions = list()
		for v in vectors:
			if len(v) != n:
				raise StructuralError(f"Every frame vector needs {n} coefficients, received {len(v)}", v)
			vector = tuple(_as_expression(e) for e in v)
			for e in vector:
				e.require_axes(n)
			expressions.append(vector)

		self._grid = grid
		self._name = name
		self._expressions: Tuple[Tuple[Expression, ...], ...] = tuple(expressions)
		self._derivatives = tuple(tuple(tuple(e.diff(b) for b in range(n)) for e in v) for v in self._expressions)

		mesh = grid.mesh()
		# (k, n, *dims)
		self._coefficients = np.stack([np.stack([e(*mesh) for e in v]) for v in self._expressions])
		self._coefficients.setflags(write=False)
		self._fields = tuple(VectorField(grid, c, expressions=v) for c, v in zip(self._coefficients,
																				 self._expressions))

		gram_det = np.linalg.det(self.gram())
		if np.min(gram_det) <= GRAM_TOLERANCE:
			raise DegenerateFrameError(f"Frame vectors are linearly dependent, Gram determinant reaches "
									   f"{np.min(gram_det):.3e}", self)

	@staticmethod
	def flat(grid: Grid) -> Frame:
		""" :return: the coordinate frame :math:`\\partial_x, \\partial_y[, \\partial_z]`, for which :math:`\\tau = TM` """
		n = grid.ndim
		return Frame(grid, [["1" if a == i else "0" for a in range(n)] for i in range(n)], name="flat")

	@staticmethod
	def sin_heisenberg(grid: Grid) -> Frame:
		"""
		:return: the periodic step-3 frame :math:`\\{\\partial_x, \\partial_y + \\sin(2\\pi x)\\partial_z\\}` on the
			3-torus; it has step 2 where :math:`\\cos(2\\pi x) \\neq 0` and step 3 on the loci :math:`x = 1/4, 3/4`
		:raise StructuralError: if the grid is not 3-dimensional
		"""
		if grid.ndim != 3:
			raise StructuralError("The sin-heisenberg frame lives on the 3-torus", grid)
		return Frame(grid, [("1", "0", "0"), ("0", "1", "sin(2*pi*x)")], name="sin-heisenberg")

	@staticmethod
	def builtin(name: str, grid: Grid) -> Frame:
		""" :raise NotImplementedError: if ``name`` is not one of :py:data:`BUILTIN_FRAMES` """
		key = name.strip().lower()
		if key == "flat":
			return Frame.flat(grid)
		if key == "sin-heisenberg":
			return Frame.sin_heisenberg(grid)
		raise NotImplementedError(f"Frame {name!r} is not known, choose from: {', '.join(BUILTIN_FRAMES)}")

	@property
	def grid(self) -> Grid:
		return self._grid

	@property
	def name(self) -> str:
		return self._name

	@property
	def rank(self) -> int:
		""" :return: the number ``k`` of frame vectors """
		return len(self._expressions)

	@property
	def expressions(self) -> Tuple[Tuple[Expression, ...], ...]:
		return self._expressions

	@property
	def fields(self) -> Tuple[VectorField, ...]:
		""" :return: the frame vectors sampled on the grid """
		return self._fields

	@property
	def coefficients(self) -> np.ndarray:
		""" :return: the read-only sampled frame, of shape ``(k, ndim, *dims)`` """
		return self._coefficients

	def gram(self) -> np.ndarray:
		""" :return: the ambient Gram matrices :math:`X_i \\cdot X_j`, of shape ``(*dims, k, k)`` """
		return np.einsum("ia...,ja...->...ij", self._coefficients, self._coefficients)

	def evaluate(self, points: np.ndarray) -> np.ndarray:
		"""
		:param points: an array of shape ``(m, ndim)``
		:return: the exact frame values :math:`X_i^a(q)`, of shape ``(k, ndim, m)``
		"""
		return np.stack([np.stack([e.at(points) for e in v]) for v in self._expressions])

	def jacobian(self, points: np.ndarray) -> np.ndarray:
		"""
		:param points: an array of shape ``(m, ndim)``
		:return: the exact derivatives :math:`\\partial_b X_i^a(q)`, of shape ``(k, ndim, ndim, m)``
		"""
		return np.stack([np.stack([np.stack([d.at(points) for d in row]) for row in v]) for v in self._derivatives])

	def __eq__(self, other) -> bool:
		return isinstance(other, Frame) and self._grid == other._grid and self._expressions == other._expressions

	def __hash__(self) -> int:
		return hash((self._grid, self._expressions))

	def __repr__(self) -> str:
		return repr_string(self, Frame.name, Frame.grid, Frame.rank)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ PROJECTION ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def project_tau(W: VectorField, frame: Frame) -> VectorField:
	"""
	The pointwise orthogonal projection :math:`P^\\tau W` onto :math:`\\text{span}\\{X_i\\}` in the flat coordinate
	metric: at each node the ``k x k`` Gram system is solved and :math:`\\sum c_i X_i` returned. The operator is
	idempotent and symmetric.

	:raise StructuralError: if ``W`` and ``frame`` live on different grids
	:raise DegenerateFrameError: if a Gram matrix is numerically singular
	"""
	require_same_grid(W, frame.grid)
	X = frame.coefficients
	gram = frame.gram()
	if np.min(np.linalg.det(gram)) <= GRAM_TOLERANCE:
		raise DegenerateFrameError("Gram matrix is singular, cannot project", frame)
	rhs = np.einsum("ia...,a...->...i", X, W.components)
	c = np.linalg.solve(gram, rhs[..., np.newaxis])[..., 0]
	return VectorField(W.grid, np.einsum("...i,ia...->a...", c, X))

def horizontal_coefficients(u: ScalarField, frame: Frame, order: StencilOrder = 4) -> np.ndarray:
	""" :return: the derivatives :math:`X_i \\cdot \\nabla u` along the frame, of shape ``(k, *dims)`` """
	require_same_grid(u, frame.grid)
	gradient = grad(u, order).components
	return np.sum(frame.coefficients * gradient[np.newaxis], axis=1)

def horizontal_gradient(u: ScalarField, frame: Frame,
						method: Literal["frame", "projection"] = "frame",
						order: StencilOrder = 4) -> VectorField:
	"""
	The horizontal gradient :math:`\\nabla^\\tau u`.

	With ``method="frame"`` this is :math:`\\sum_i (X_i \\cdot \\nabla u) X_i`, which depends on the subriemannian
	metric only. With ``method="projection"`` it is :math:`P^\\tau \\nabla u`. The two agree to round-off when the frame
	is orthonormal in the flat ambient metric.
	"""
	if method == "projection":
		return project_tau(grad(u, order), frame)
	if method != "frame":
		raise NotImplementedError(f"Method {method!r} is not known, choose from: frame, and projection")
	return horizontal_field(frame, horizontal_coefficients(u, frame, order))

def horizontal_field(frame: Frame, coefficients: np.ndarray) -> VectorField:
	""" :return: :math:`\\sum_i c_i X_i` for coefficient fields ``c`` of shape ``(k, *dims)`` """
	coefficients = np.asarray(coefficients, dtype=np.float64)
	if coefficients.shape != (frame.rank, *frame.grid.dims):
		raise StructuralError(f"Expected coefficients of shape {(frame.rank, *frame.grid.dims)}, received "
							  f"{coefficients.shape}", frame)
	return VectorField(frame.grid, np.sum(coefficients[:, np.newaxis] * frame.coefficients, axis=0))

def random_horizontal_coefficients(frame: Frame, rng: np.random.Generator, max_mode: int = 2) -> np.ndarray:
	"""
	Smooth random coefficient fields: every coefficient is a sum of real Fourier modes with frequencies up to
	``max_mode`` per axis and standard normal amplitudes damped by :math:`1 / (1 + |k|^2)`.

	:return: an array of shape ``(k, *dims)``, see :py:func:`horizontal_field`
	"""
	grid = frame.grid
	mesh = grid.mesh()
	out = np.zeros((frame.rank, *grid.dims))
	broadcast = (frame.rank,) + (1,) * grid.ndim
	for k in np.ndindex(*(2 * max_mode + 1,) * grid.ndim):
		k = np.asarray(k) - max_mode
		phase = sum(2 * np.pi * k[a] * mesh[a] / grid.period[a] for a in range(grid.ndim))
		amplitudes = rng.standard_normal((2, frame.rank)) / (1 + np.sum(k ** 2))
		out += amplitudes[0].reshape(broadcast) * np.cos(phase) + amplitudes[1].reshape(broadcast) * np.sin(phase)
	return out

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ BRACKETS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def symbolic_bracket(X: Sequence[Expression], Y: Sequence[Expression]) -> Tuple[Expression, ...]:
	""" :return: the exact components of :math:`[X, Y] = (X \\cdot \\nabla) Y - (Y \\cdot \\nabla) X` """
	n = len(X)
	out = list()
	for a in range(n):
		tree = sum((X[b].tree * sympy.diff(Y[a].tree, SYMBOLS[b]) - Y[b].tree * sympy.diff(X[a].tree, SYMBOLS[b])
					for b in range(n)), sympy.Integer(0))
		out.append(Expression.from_sympy(sympy.expand(tree)))
	return tuple(out)

def bracket(X: VectorField, Y: VectorField, order: StencilOrder = 4) -> VectorField:
	"""
	The Lie bracket :math:`[X, Y] = (X \\cdot \\nabla) Y - (Y \\cdot \\nabla) X`, componentwise.

	If both fields carry closed-form expressions the bracket is formed symbolically and sampled exactly (the result
	carries its expressions too); otherwise the grid stencil of the given order differentiates.
	"""
	grid = require_same_grid(X, Y)
	if X.expressions is not None and Y.expressions is not None:
		expressions = symbolic_bracket(X.expressions, Y.expressions)
		mesh = grid.mesh()
		return VectorField(grid, np.stack([e(*mesh) for e in expressions]), expressions=expressions)

	def directional(V: VectorField, U: VectorField) -> np.ndarray:
		# (V . grad) U, componentwise
		return np.stack([sum(V.components[b] * difference(U.components[a], b, grid.spacing[b], order)
							 for b in range(grid.ndim)) for a in range(grid.ndim)])

	return VectorField(grid, directional(X, Y) - directional(Y, X))

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GROWTH ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class GrowthReport:
	"""
	Result of :py:func:`check_bracket_generating`: the growth vector (dimension spanned by the frame and its
	iterated brackets up to each depth) at every requested point.

	:param points: the requested points, of shape ``(m, ndim)``
	:param growth: the spanned dimension per point and depth, of shape ``(m, max_depth)``
	:param ndim: the dimension of the torus
	"""

	def __init__(self, points: np.ndarray, growth: np.ndarray, ndim: int):
		self._points = points
		self._growth = growth
		self._ndim = ndim

	@property
	def points(self) -> np.ndarray:
		return self._points

	@property
	def growth(self) -> np.ndarray:
		""" :return: the full growth table, of shape ``(m, max_depth)``, nondecreasing along depth and capped at ``ndim`` """
		return self._growth

	@property
	def max_depth(self) -> int:
		return self._growth.shape[1]

	@property
	def depth_needed(self) -> np.ndarray:
		""" :return: per point, the first depth at which the full dimension is spanned, ``0`` if never """
		full = self._growth >= self._ndim
		return np.where(full.any(axis=1), full.argmax(axis=1) + 1, 0)

	@property
	def max_depth_needed(self) -> int:
		""" :return: the largest depth needed over all points, ``0`` if some point never reaches full rank """
		needed = self.depth_needed
		return 0 if np.any(needed == 0) else int(needed.max())

	@property
	def bracket_generating(self) -> bool:
		""" :return: whether the full dimension is reached at every requested point within :py:attr:`max_depth` """
		return bool(np.all(self._growth[:, -1] >= self._ndim))

	def growth_vector(self, index: int) -> Tuple[int, ...]:
		""" :return: the growth vector at point ``index``, cut after the first depth that spans everything """
		needed = int(self.depth_needed[index])
		row = self._growth[index]
		return tuple(int(v) for v in (row[:needed] if needed > 0 else row))

	def __repr__(self) -> str:
		return repr_string(self, GrowthReport.max_depth, GrowthReport.max_depth_needed, GrowthReport.bracket_generating)

def _bracket_tower(frame: Frame, max_depth: int) -> List[List[Tuple[Expression, ...]]]:
	""" :return: per depth, the right-normed brackets :math:`[X_{i_1}, [X_{i_2}, \\dots X_{i_d}]]` """
	tower = [list(frame.expressions)]
	for _ in range(1, max_depth):
		layer = list()
		for X in frame.expressions:
			for B in tower[-1]:
				candidate = symbolic_bracket(X, B)
				if not all(e.is_zero for e in candidate):
					layer.append(candidate)
		tower.append(layer)
	return tower

def check_bracket_generating(frame: Frame, max_depth: int, points: Optional[np.ndarray] = None) -> GrowthReport:
	"""
	Numerically verifies the bracket-generating condition. At every point the span of the frame and its iterated
	brackets up to each depth is measured by the singular values of the stacked vectors, counting those above
	:py:data:`RANK_THRESHOLD`. Brackets are formed symbolically, so no stencil error can fake a rank drop.

	Not reaching full rank within ``max_depth`` is a reported outcome, not an error.

	:param frame: the frame to check
	:param max_depth: the deepest bracket level to include, at least 1
	:param points: optional points of shape ``(m, ndim)`` to check, defaults to all grid nodes

	:raise ValueError: if ``max_depth`` is below 1
	"""
	if max_depth < 1:
		raise ValueError(f"max_depth must be at least 1, received {max_depth}")
	points = frame.grid.points() if points is None else np.atleast_2d(np.asarray(points, dtype=np.float64))
	n = frame.grid.ndim

	stacked = list()
	growth = np.zeros((points.shape[0], max_depth), dtype=int)
	for depth, layer in enumerate(_bracket_tower(frame, max_depth)):
		for vector in layer:
			# (m, n)
			stacked.append(np.stack([e.at(points) for e in vector], axis=-1))
		matrices = np.stack(stacked, axis=1)
		singular = np.linalg.svd(matrices, compute_uv=False)
		growth[:, depth] = np.minimum(np.sum(singular > RANK_THRESHOLD, axis=1), n)
		logger.debug("Bracket depth %d: %d vectors, minimum rank %d", depth + 1, len(stacked), growth[:, depth].min())
	return GrowthReport(points, growth, n)
