"""
:Date: 05.10.2026

.. versionadded:: v0.1.0

The sub-Laplacian :math:`\\Delta^\\tau_\\nu u = \\text{div}_\\nu(\\nabla^\\tau u)`, a deflated conjugate gradient solver
for the zero-mean Poisson problem :math:`\\Delta^\\tau_\\nu u = \\rho`, and the nonholonomic Hodge decomposition
:math:`W = \\nabla^\\tau f + U` with :math:`\\text{div}_\\nu U = 0`.

On collocated grids the central stencils annihilate the alternating mode :math:`(-1)^i` along every axis with an
even node count. The discrete kernel of :math:`\\Delta^\\tau_\\nu` is therefore spanned by the products of
:math:`\\{1, (-1)^i\\}` over the even axes (see :py:func:`kernel_basis`), and the solver deflates all of it. Only
the constant mode is a genuine solvability condition; the alternating remainder is projected out and reported.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import itertools
import logging
from typing import Callable, Optional, Tuple, List, Literal, Final, Union, final

import numpy as np
from SEPModules.SEPPrinting import repr_string

from SubRosa.Distribution import Frame, horizontal_gradient
from SubRosa.GridBase import Grid, ScalarField, VectorField, Density, SolvabilityError, ConvergenceError, \
	require_same_grid, divergence, integrate, StencilOrder, STENCILS

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE: Final[float] = 1e-8
""" Default relative residual tolerance of :py:func:`solve_poisson`. """

SOLVABILITY_TOLERANCE: Final[float] = 1e-10
""" Largest admissible :math:`|\\int \\rho \\, d\\nu|` of a Poisson source. """

REFRESH_INTERVAL: Final[int] = 50
""" The CG residual is recomputed from scratch every this many iterations. """

GradientMethod: Final = Literal["frame", "projection"]

Operator: Final = Callable[[np.ndarray], np.ndarray]

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ SUB-LAPLACIAN ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def sub_laplacian(u: ScalarField, frame: Frame, nu: Optional[Density] = None, method: GradientMethod = "frame",
				  order: StencilOrder = 4) -> ScalarField:
	"""
	:math:`\\Delta^\\tau_\\nu u = \\text{div}_\\nu(\\nabla^\\tau u)`. As a matrix it is symmetric and negative semidefinite
	in the ``nu``-weighted pairing, and constants lie in its kernel.

	:param u: the field to apply the operator to
	:param frame: the horizontal frame
	:param nu: the volume, ``None`` for the reference volume
	:param method: how the horizontal gradient is formed, see :py:func:`.horizontal_gradient`
	:param order: the stencil order

	:raise StructuralError: if the arguments live on different grids
	"""
	require_same_grid(u, frame.grid, *(() if nu is None else (nu,)))
	return divergence(horizontal_gradient(u, frame, method, order), nu, order)

def _operator(frame: Frame, nu: Optional[Density], method: GradientMethod, order: StencilOrder) -> Operator:
	grid = frame.grid

	def apply(values: np.ndarray) -> np.ndarray:
		return sub_laplacian(ScalarField(grid, values), frame, nu, method, order).values

	return apply

def jacobi_diagonal(frame: Frame, nu: Optional[Density] = None, order: StencilOrder = 4) -> np.ndarray:
	"""
	The diagonal of the assembled frame-sum sub-Laplacian, in closed form: with
	:math:`g_k = r \\sum_i (X_i^k)^2` and stencil weights :math:`c_a`, the entry at node ``j`` is
	:math:`-\\frac{1}{r_j} \\sum_k \\sum_a c_a^2 \\, g_k(j + a e_k) / h_k^2`.

	:return: the diagonal, of shape ``grid.dims``; all entries are negative for a nondegenerate frame
	"""
	grid = frame.grid
	ratio = np.ones(grid.dims) if nu is None else nu.ratio
	diagonal = np.zeros(grid.dims)
	for k in range(grid.ndim):
		g = ratio * np.sum(frame.coefficients[:, k] ** 2, axis=0)
		for offset, c in STENCILS[order]:
			for shift in (offset, -offset):
				diagonal -= c ** 2 * np.roll(g, -shift, axis=k) / grid.spacing[k] ** 2
	return diagonal / ratio

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ KERNEL ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def kernel_basis(grid: Grid) -> np.ndarray:
	"""
	:return: the grid functions annihilated by the central stencils, of shape ``(K, *dims)``, the constant first;
		``K = 2^e`` where ``e`` is the number of axes with an even node count
	"""
	factors = list()
	for a, d in enumerate(grid.dims):
		shape = [1] * grid.ndim
		shape[a] = d
		modes = [np.ones(shape)]
		if d % 2 == 0:
			modes.append(((-1.0) ** np.arange(d)).reshape(shape))
		factors.append(modes)
	return np.stack([np.broadcast_to(np.prod(np.broadcast_arrays(*combination), axis=0), grid.dims)
					 for combination in itertools.product(*factors)])

class KernelProjector:
	"""
	The ``nu``-orthogonal projector onto the complement of :py:func:`kernel_basis`. The modes are
	``nu``-orthonormalized once through their Gram matrix.

	:param grid: the grid
	:param nu: the volume defining orthogonality, ``None`` for the reference volume
	"""

	def __init__(self, grid: Grid, nu: Optional[Density] = None):
		self._grid = grid
		self._weights = np.full(grid.dims, grid.weight) if nu is None else nu.ratio * grid.weight
		basis = kernel_basis(grid)
		gram = np.einsum("i...,j...,...->ij", basis, basis, self._weights)
		# Cholesky factor turns the modes into a nu-orthonormal set
		inverse_factor = np.linalg.inv(np.linalg.cholesky(gram))
		self._basis = np.einsum("ij,j...->i...", inverse_factor, basis)

	@property
	def weights(self) -> np.ndarray:
		""" :return: the quadrature weights of the ``nu``-pairing """
		return self._weights

	@property
	def dimension(self) -> int:
		return self._basis.shape[0]

	def coefficients(self, values: np.ndarray) -> np.ndarray:
		""" :return: the ``nu``-orthonormal kernel coefficients of ``values``, the constant mode first """
		return np.einsum("i...,...->i", self._basis, values * self._weights)

	def __call__(self, values: np.ndarray) -> np.ndarray:
		return values - np.einsum("i,i...->...", self.coefficients(values), self._basis)

	def __repr__(self) -> str:
		return repr_string(self, KernelProjector.dimension)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ CONJUGATE GRADIENT ~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def conjugate_gradient(operator: Operator, rhs: np.ndarray, weights: np.ndarray, tol: float,
					   max_iterations: int, x0: Optional[np.ndarray] = None,
					   project: Optional[Operator] = None,
					   preconditioner: Optional[Operator] = None,
					   refresh_interval: int = REFRESH_INTERVAL) -> Tuple[np.ndarray, int, List[float]]:
	"""
	Conjugate gradients for a symmetric positive (semi)definite ``operator`` in the inner product
	:math:`\\langle a, b \\rangle = \\sum a b w`. The recurrence residual is replaced by the true residual every
	``refresh_interval`` iterations, and convergence is only accepted once the true residual meets ``tol``.

	:param operator: the matrix-free operator
	:param rhs: the right-hand side
	:param weights: the inner product weights
	:param tol: the relative residual tolerance
	:param max_iterations: the iteration cap
	:param x0: an optional initial guess
	:param project: an optional projector onto the subspace the solve is restricted to, applied to every residual
		and search direction
	:param preconditioner: an optional approximate inverse commuting with the weights, e.g. a diagonal
	:param refresh_interval: how often the true residual replaces the recurrence residual

	:return: the solution, the iteration count and the relative residual history (starting with the initial guess)

	:raise ConvergenceError: if the cap is reached or the search direction loses positivity
	"""
	project = (lambda v: v) if project is None else project
	preconditioner = (lambda v: v) if preconditioner is None else preconditioner

	def dot(a: np.ndarray, b: np.ndarray) -> float:
		return float(np.sum(a * b * weights))

	rhs = project(rhs)
	b_norm = np.sqrt(dot(rhs, rhs))
	if b_norm == 0:
		return np.zeros_like(rhs), 0, [0.0]

	x = np.zeros_like(rhs) if x0 is None else project(np.array(x0, dtype=np.float64))
	r = project(rhs - operator(x))
	history = [np.sqrt(dot(r, r)) / b_norm]
	iterations = 0

	while history[-1] > tol:
		z = project(preconditioner(r))
		p = z
		rz = dot(r, z)
		while True:
			if iterations >= max_iterations:
				raise ConvergenceError(f"Conjugate gradients did not converge within {max_iterations} iterations, "
									   f"relative residual is {history[-1]:.3e}", operator, history[-1])
			Ap = operator(p)
			curvature = dot(p, Ap)
			if not curvature > 0:
				raise ConvergenceError(f"Conjugate gradients broke down after {iterations} iterations",
									   operator, history[-1])
			alpha = rz / curvature
			x = x + alpha * p
			iterations += 1
			if iterations % refresh_interval == 0:
				r = project(rhs - operator(x))
			else:
				r = project(r - alpha * Ap)
			history.append(np.sqrt(dot(r, r)) / b_norm)
			if history[-1] <= tol:
				break
			z = project(preconditioner(r))
			rz_new = dot(r, z)
			p = z + (rz_new / rz) * p
			rz = rz_new

		# accept only on the true residual, otherwise restart from it
		r = project(rhs - operator(x))
		history[-1] = np.sqrt(dot(r, r)) / b_norm

	return x, iterations, history

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ POISSON SOLVE ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class PoissonSolution:
	"""
	Result of :py:func:`solve_poisson`.

	:param u: the solution, normalized so that it is ``nu``-orthogonal to the discrete kernel (in particular of
		``nu``-mean zero)
	:param residual_norm: the final relative residual in the ``nu``-weighted :math:`L^2` norm
	:param iterations: the CG iteration count
	:param residual_history: the relative residual after every iteration
	:param kernel_defect: the ``nu``-norm of the source component removed because it lies in the discrete kernel
	"""

	def __init__(self, u: ScalarField, residual_norm: float, iterations: int, residual_history: List[float],
				 kernel_defect: float = 0.0):
		self._u = u
		self._residual_norm = float(residual_norm)
		self._iterations = int(iterations)
		self._residual_history = tuple(float(r) for r in residual_history)
		self._kernel_defect = float(kernel_defect)

	@property
	def u(self) -> ScalarField:
		return self._u

	@property
	def residual_norm(self) -> float:
		return self._residual_norm

	@property
	def iterations(self) -> int:
		return self._iterations

	@property
	def residual_history(self) -> Tuple[float, ...]:
		return self._residual_history

	@property
	def kernel_defect(self) -> float:
		return self._kernel_defect

	def __repr__(self) -> str:
		return repr_string(self, PoissonSolution.iterations, PoissonSolution.residual_norm,
						   PoissonSolution.kernel_defect)

def default_iteration_cap(grid: Grid) -> int:
	""" :return: ``50 * sqrt(grid.size)`` """
	return int(np.ceil(50 * np.sqrt(grid.size)))

def solve_poisson(rho: ScalarField, frame: Frame, nu: Optional[Density] = None, tol: float = DEFAULT_TOLERANCE,
				  max_iterations: Optional[int] = None, preconditioned: bool = False,
				  method: GradientMethod = "frame", order: StencilOrder = 4) -> PoissonSolution:
	"""
	Solves :math:`\\Delta^\\tau_\\nu u = \\rho` by conjugate gradients on :math:`-\\Delta^\\tau_\\nu`, restricted to the
	``nu``-orthogonal complement of the discrete kernel. The iteration count is deterministic for fixed inputs, and
	:math:`\\rho \\equiv 0` returns :math:`u \\equiv 0` after 0 iterations.

	:param rho: the source, which must have zero ``nu``-integral
	:param frame: the horizontal frame
	:param nu: the volume, ``None`` for the reference volume
	:param tol: the relative residual tolerance, in ``(0, 1e-4]``
	:param max_iterations: the iteration cap, defaults to :py:func:`default_iteration_cap`
	:param preconditioned: whether to use the Jacobi preconditioner from :py:func:`jacobi_diagonal`
	:param method: how the horizontal gradient is formed
	:param order: the stencil order

	:raise ValueError: if ``tol`` is outside ``(0, 1e-4]``
	:raise SolvabilityError: if :math:`|\\int \\rho \\, d\\nu|` exceeds :py:data:`SOLVABILITY_TOLERANCE`
	:raise ConvergenceError: if CG reaches the iteration cap
	:raise StructuralError: if the arguments live on different grids
	"""
	grid = require_same_grid(rho, frame.grid, *(() if nu is None else (nu,)))
	if not 0 < tol <= 1e-4:
		raise ValueError(f"Tolerance must lie in (0, 1e-4], received {tol}")

	mean = integrate(rho, nu)
	if abs(mean) > SOLVABILITY_TOLERANCE:
		raise SolvabilityError(f"Poisson source has nonzero integral {mean:.3e}, only zero-mean sources are in the "
							   f"image of the sub-Laplacian", rho)

	projector = KernelProjector(grid, nu)
	source = projector(rho.values)
	rho_norm = np.sqrt(np.sum(rho.values ** 2 * projector.weights))
	kernel_defect = float(np.sqrt(np.sum((rho.values - source) ** 2 * projector.weights)))
	if kernel_defect > SOLVABILITY_TOLERANCE * max(rho_norm, 1.0):
		logger.warning("Removed a kernel component of norm %.3e from the Poisson source", kernel_defect)

	apply = _operator(frame, nu, method, order)
	preconditioner = None
	if preconditioned:
		inverse_diagonal = -1.0 / jacobi_diagonal(frame, nu, order)
		preconditioner = lambda v: inverse_diagonal * v

	max_iterations = default_iteration_cap(grid) if max_iterations is None else max_iterations
	x, iterations, history = conjugate_gradient(lambda v: -apply(v), -source, projector.weights, tol,
												max_iterations, project=projector, preconditioner=preconditioner)
	logger.debug("Poisson solve on %r: %d iterations, relative residual %.3e", grid, iterations, history[-1])
	return PoissonSolution(ScalarField(grid, x), history[-1], iterations, history, kernel_defect)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ HODGE ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def hodge_decompose(W: VectorField, frame: Frame, nu: Optional[Density] = None, tol: float = DEFAULT_TOLERANCE,
					return_solution: bool = False, **kwargs) \
		-> Union[Tuple[ScalarField, VectorField], Tuple[ScalarField, VectorField, PoissonSolution]]:
	"""
	Nonholonomic Hodge decomposition :math:`W = \\nabla^\\tau f + U`: ``f`` solves
	:math:`\\Delta^\\tau_\\nu f = \\text{div}_\\nu W` and :math:`U = W - \\nabla^\\tau f` is ``nu``-divergence free up to
	the solver tolerance. For horizontal ``W`` the two parts are ``nu``-orthogonal.

	:param W: the field to decompose
	:param frame: the horizontal frame
	:param nu: the volume, ``None`` for the reference volume
	:param tol: the relative tolerance of the Poisson solve
	:param return_solution: whether to also return the :py:class:`PoissonSolution` diagnostics
	:param kwargs: further keyword arguments for :py:func:`solve_poisson`

	:return: ``(f, U)``, or ``(f, U, solution)``
	"""
	solution = solve_poisson(divergence(W, nu), frame, nu, tol, **kwargs)
	f = solution.u
	U = W - horizontal_gradient(f, frame, kwargs.get("method", "frame"), kwargs.get("order", 4))
	return (f, U, solution) if return_solution else (f, U)
