"""
:Date: 06.10.2026

.. versionadded:: v0.1.0

Particle flow maps seeded at the grid nodes and their reconstruction onto the grid. A :py:class:`FlowMap` records
where every node went and the accumulated :math:`\\log \\det D\\phi` there; :py:func:`pushforward_density` turns the
pair back into the density :math:`\\phi_* \\nu`, whose ratio at :math:`\\phi(x)` is
:math:`\\text{ratio}(x) / \\det D\\phi(x)`.

Two reconstruction kernels are provided:

*	``"scatter"`` deposits the particle masses and particle volumes :math:`\\det D\\phi \\cdot dV` onto the nodes with
	periodic linear (cloud-in-cell) weights and divides the two deposits. The division cancels the aliasing of the
	particle lattice, which a raw mass deposit would carry, and reproduces linear interpolation exactly for rigid
	translations.
*	``"pullback"`` inverts the map at every node by the fixed point iteration :math:`x \\leftarrow y - d(x)` on the
	cubic spline of the displacement :math:`d`, then gathers ``ratio / det`` at the preimage with cubic splines. It
	is higher order and requires an invertible, shock-free map.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple, Literal, Final, Union, Callable

import numpy as np
from SEPModules.SEPPrinting import repr_string

from SubRosa.GridBase import Grid, Density, StructuralError, IntegrationError, PeriodicInterpolator, \
	require_same_grid, difference, StencilOrder

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

Kernel: Final = Literal["scatter", "pullback"]
""" Type alias for the reconstruction kernels of :py:func:`pushforward_density`. """

KERNELS: Final[Tuple[str, ...]] = ("scatter", "pullback")

PREIMAGE_ITERATIONS: Final[int] = 50
PREIMAGE_TOLERANCE: Final[float] = 1e-13

SHOCK_DISTANCE: Final[float] = 0.01
""" Neighboring particles closer than this fraction of the spacing signal a shock. """

RENORMALIZATION_WARNING: Final[float] = 1e-6

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FLOW MAP ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class FlowMap:
	"""
	:py:class:`FlowMap` stores the image :math:`\\phi(x)` of every grid node ``x`` (in storage order) together with
	:math:`\\log \\det D\\phi(x)`.

	:param grid: the grid the particles were seeded on
	:param positions: an array of shape ``(grid.size, ndim)``, wrapped into the fundamental domain on construction
	:param log_jacobian: an array of shape ``(grid.size,)``
	:param t_final: the flow time the map corresponds to
	:param velocities: keyword-only, optional particle velocities at ``t_final``, of shape ``(grid.size, ndim)``
	:param shock: keyword-only, whether the map is known to have lost invertibility

	:raise StructuralError: if an array has the wrong shape
	:raise IntegrationError: if a position or log-Jacobian is not finite
	"""

	def __init__(self, grid: Grid, positions: np.ndarray, log_jacobian: np.ndarray, t_final: float, *,
				 velocities: Optional[np.ndarray] = None, shock: bool = False):
		positions = np.asarray(positions, dtype=np.float64)
		log_jacobian = np.asarray(log_jacobian, dtype=np.float64).ravel()
		if positions.shape != (grid.size, grid.ndim):
			raise StructuralError(f"Expected positions of shape {(grid.size, grid.ndim)}, received "
								  f"{positions.shape}", grid)
		if log_jacobian.shape != (grid.size,):
			raise StructuralError(f"Expected {grid.size} log-Jacobians, received {log_jacobian.size}", grid)
		if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(log_jacobian))):
			raise IntegrationError("Flow map contains non-finite particle states", grid)
		if velocities is not None:
			velocities = np.asarray(velocities, dtype=np.float64)
			if velocities.shape != positions.shape:
				raise StructuralError(f"Expected velocities of shape {positions.shape}, received {velocities.shape}",
									  grid)

		self._grid = grid
		self._positions = grid.wrap(positions)
		self._log_jacobian = log_jacobian.copy()
		self._t_final = float(t_final)
		self._velocities = None if velocities is None else velocities.copy()
		self._shock = bool(shock)
		for a in (self._positions, self._log_jacobian, self._velocities):
			if a is not None:
				a.setflags(write=False)

	@staticmethod
	def identity(grid: Grid) -> FlowMap:
		return FlowMap(grid, grid.points(), np.zeros(grid.size), 0.0)

	@property
	def grid(self) -> Grid:
		return self._grid

	@property
	def positions(self) -> np.ndarray:
		""" :return: the wrapped particle positions, of shape ``(size, ndim)`` """
		return self._positions

	@property
	def log_jacobian(self) -> np.ndarray:
		return self._log_jacobian

	@property
	def t_final(self) -> float:
		return self._t_final

	@property
	def velocities(self) -> Optional[np.ndarray]:
		return self._velocities

	@property
	def shock(self) -> bool:
		return self._shock

	def displacement(self) -> np.ndarray:
		""" :return: the minimal-image displacement :math:`\\phi(x) - x`, of shape ``(ndim, *dims)`` """
		delta = self._grid.minimal_image(self._positions - self._grid.points())
		return delta.T.reshape((self._grid.ndim, *self._grid.dims))

	def jacobian(self) -> np.ndarray:
		""" :return: :math:`\\det D\\phi` at the nodes, of shape ``dims`` """
		return np.exp(self._log_jacobian).reshape(self._grid.dims)

	def __repr__(self) -> str:
		return repr_string(self, FlowMap.grid, FlowMap.t_final, FlowMap.shock)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ LATTICE DIAGNOSTICS ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def lattice_log_jacobian(grid: Grid, displacement: np.ndarray, order: StencilOrder = 4) -> Tuple[np.ndarray, bool]:
	"""
	:math:`\\log |\\det(I + Dd)|` of a map given by its periodic displacement field ``d`` at the nodes, using the
	central stencil on the displacement. A map whose determinant is not positive somewhere, or which brings two
	neighboring particles closer than :py:data:`SHOCK_DISTANCE` spacings, is flagged as shocked.

	:param grid: the grid
	:param displacement: an array of shape ``(ndim, *dims)``
	:param order: the stencil order

	:return: the log-Jacobian at the nodes, flattened in storage order, and the shock flag
	"""
	n = grid.ndim
	# (*dims, a, b) = d_b phi^a
	matrix = np.empty((*grid.dims, n, n))
	for a in range(n):
		for b in range(n):
			matrix[..., a, b] = (1.0 if a == b else 0.0) + difference(displacement[a], b, grid.spacing[b], order)
	det = np.linalg.det(matrix)

	positions = np.stack([m for m in grid.mesh()]) + displacement
	closest = np.inf
	for k in range(n):
		gap = grid.minimal_image(np.moveaxis(np.roll(positions, -1, axis=k + 1) - positions, 0, -1))
		closest = min(closest, float(np.min(np.linalg.norm(gap, axis=-1))) / grid.spacing[k])

	shock = bool(np.min(det) <= 0 or closest < SHOCK_DISTANCE)
	if shock:
		logger.warning("Particle lattice has crossed: minimum det %.3e, closest neighbors at %.3e spacings",
					   np.min(det), closest)
	return np.log(np.maximum(np.abs(det), np.finfo(float).tiny)).ravel(), shock

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ RECONSTRUCTION ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _cloud_in_cell(grid: Grid, positions: np.ndarray, weights: np.ndarray) -> np.ndarray:
	""" :return: ``weights`` deposited onto the nodes with periodic multilinear weights, of shape ``dims`` """
	scaled = positions / np.asarray(grid.spacing)
	base = np.floor(scaled).astype(np.int64)
	fraction = scaled - base
	dims = np.asarray(grid.dims)
	total = np.zeros(grid.size)
	for corner in itertools.product((0, 1), repeat=grid.ndim):
		corner = np.asarray(corner)
		share = np.prod(np.where(corner == 1, fraction, 1.0 - fraction), axis=1)
		index = np.ravel_multi_index(tuple(np.mod(base + corner, dims).T), grid.dims)
		total += np.bincount(index, weights=weights * share, minlength=grid.size)
	return total.reshape(grid.dims)

def preimage(flow: FlowMap, *, iterations: int = PREIMAGE_ITERATIONS, tolerance: float = PREIMAGE_TOLERANCE,
			 strict: bool = True) -> np.ndarray:
	"""
	Inverts the flow map at every node ``y`` by the fixed point iteration :math:`x \\leftarrow y - d(x)` on the cubic
	spline of the displacement.

	:param flow: the map to invert
	:param iterations: keyword-only, the iteration cap
	:param tolerance: keyword-only, the largest accepted change of the final iterate
	:param strict: keyword-only, whether a stalled iteration raises; otherwise the last iterate is returned

	:return: the preimages, unwrapped, of shape ``(size, ndim)``
	:raise IntegrationError: if ``strict`` and the iteration fails to reach ``1e3 * tolerance``, which happens once
		the map folds
	"""
	grid = flow.grid
	targets = grid.points()
	spline = PeriodicInterpolator(grid, flow.displacement(), order=3)
	x = targets.copy()
	change = np.inf
	for _ in range(iterations):
		update = targets - spline(x).T
		change = float(np.max(np.abs(update - x)))
		x = update
		if change <= tolerance:
			break
	if change > 1e3 * tolerance:
		if strict:
			raise IntegrationError(f"Flow map inversion stalled at a step of {change:.3e}, the map is not invertible",
								   flow)
		logger.warning("Flow map inversion stalled at a step of %.3e, reconstructed values are unreliable", change)
	return x

def deposit_density(flow: FlowMap, mu0: Density, kernel: Kernel = "scatter") -> Tuple[np.ndarray, float]:
	"""
	The unnormalized pushforward ratio :math:`\\phi_* \\mu_0 / \\mu` at the nodes, and the relative mass drift of the
	reconstruction, :math:`|\\text{mass} / \\text{mass}(\\mu_0) - 1|`.

	:raise StructuralError: if ``flow`` was not seeded on the grid of ``mu0``
	:raise IntegrationError: if the scatter deposit leaves a node without particle volume
	:raise NotImplementedError: if ``kernel`` is not one of :py:data:`KERNELS`
	"""
	grid = require_same_grid(flow.grid, mu0)
	if kernel == "scatter":
		mass = _cloud_in_cell(grid, flow.positions, mu0.ratio.ravel() * grid.weight)
		volume = _cloud_in_cell(grid, flow.positions, np.exp(flow.log_jacobian) * grid.weight)
		if np.min(volume) <= 0:
			raise IntegrationError("Particle scatter left nodes without volume, use the pullback kernel", flow)
		ratio = mass / volume
	elif kernel == "pullback":
		x = preimage(flow)
		gather = PeriodicInterpolator(grid, np.stack([mu0.ratio, flow.log_jacobian.reshape(grid.dims)]), order=3)
		r0, log_j = gather(x)
		ratio = (r0 * np.exp(-log_j)).reshape(grid.dims)
	else:
		raise NotImplementedError(f"Kernel {kernel!r} is not known, choose from: {', '.join(KERNELS)}")
	drift = abs(float(np.mean(ratio)) / mu0.mass - 1.0)
	return ratio, drift

def pushforward_density(flow: FlowMap, mu0: Density, kernel: Kernel = "scatter") -> Density:
	"""
	The pushforward :math:`\\phi_* \\mu_0`, reconstructed with the given kernel (see the module documentation) and
	renormalized to the mass of ``mu0``, i.e. to 1 for normalized densities. The renormalization factor is an error
	indicator: it is logged, and a warning is issued above :py:data:`RENORMALIZATION_WARNING`.

	:raise PositivityError: if the reconstruction produced a non-positive ratio
	"""
	ratio, drift = deposit_density(flow, mu0, kernel)
	log = logger.warning if drift > RENORMALIZATION_WARNING else logger.debug
	log("Pushforward reconstruction (%s) renormalized by a relative %.3e", kernel, drift)
	return Density(flow.grid, ratio * (mu0.mass / np.mean(ratio)))

def pullback_values(flow: FlowMap, values: np.ndarray, strict: bool = True) -> np.ndarray:
	"""
	Transfers per-particle data to the nodes: the value at node ``y`` is the cubic spline of ``values`` (given per seed
	node) at the preimage of ``y``.

	:param flow: the flow map
	:param values: an array of shape ``(size,)`` or ``(c, size)``
	:param strict: whether a non-invertible map raises, see :py:func:`preimage`
	:return: an array of shape ``dims`` or ``(c, *dims)``
	"""
	grid = flow.grid
	values = np.asarray(values, dtype=np.float64)
	channels = values.reshape((-1, *grid.dims))
	out = PeriodicInterpolator(grid, channels, order=3)(preimage(flow, strict=strict))
	return out.reshape((*values.shape[:-1], *grid.dims))

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ PARTICLES ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def advance_particles(step: Callable[..., Tuple[np.ndarray, ...]], *state: np.ndarray,
					  threads: int = 1) -> Tuple[np.ndarray, ...]:
	"""
	Applies a per-particle ``step`` to the particle ``state`` arrays (particles along axis 0), split into ``threads``
	contiguous chunks that run concurrently. Particles never interact, so chunking leaves the arithmetic of every
	particle unchanged and the result bit-identical to a single chunk.

	:param step: maps the state arrays of a set of particles to their new state arrays
	:param state: the state arrays, all with the same leading length
	:param threads: keyword-only, the number of chunks
	"""
	if threads <= 1:
		return tuple(step(*state))
	bounds = np.linspace(0, state[0].shape[0], threads + 1).astype(int)
	chunks = [tuple(s[lo:hi] for s in state) for lo, hi in zip(bounds[:-1], bounds[1:])]
	with ThreadPoolExecutor(max_workers=threads) as executor:
		results = list(executor.map(lambda chunk: step(*chunk), chunks))
	return tuple(np.concatenate([r[i] for r in results]) for i in range(len(results[0])))

def flow_from_arrays(grid: Grid, positions: Union[np.ndarray, list], log_jacobian: Union[np.ndarray, list],
					 t_final: float = 1.0) -> FlowMap:
	""" :return: a :py:class:`FlowMap` from raw arrays, as read from a flow file """
	return FlowMap(grid, np.reshape(positions, (grid.size, grid.ndim)), np.reshape(log_jacobian, grid.size), t_final)
