"""
:Date: 07.10.2026

.. versionadded:: v0.1.0

The nonholonomic Moser flow. Along the segment :math:`\\mu_t = \\mu_0 + t(\\mu_1 - \\mu_0)` the source
:math:`\\rho_t = (\\text{ratio}_0 - \\text{ratio}_1) / \\text{ratio}_t` satisfies :math:`\\mu_0 - \\mu_1 = \\rho_t \\mu_t`.
Solving :math:`\\Delta^\\tau_{\\mu_t} u = \\rho_t` and setting :math:`V_t = \\nabla^\\tau u` gives a horizontal field with
:math:`\\mathcal{L}_{V_t} \\mu_t = \\mu_0 - \\mu_1`, whose time-one flow pushes :math:`\\mu_0` to :math:`\\mu_1`.

Particles seeded at the grid nodes are advanced by RK4. Within a substep the velocity is frozen at the midpoint
density unless per-stage solves are requested. Particle velocities are assembled from the interpolated frame
coefficients :math:`X_i \\cdot \\nabla u` and the exact frame vectors at the particle position, so they are
horizontal to round-off wherever the particle is.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import logging
from typing import Tuple, List, Sequence, Dict, Final, final

import numpy as np
from SEPModules.SEPPrinting import repr_string

from SubRosa.Distribution import Frame, project_tau, horizontal_coefficients
from SubRosa.FlowBase import FlowMap, Kernel, deposit_density, advance_particles
from SubRosa.Geodesics import monge_ampere_residual
from SubRosa.GridBase import ScalarField, VectorField, Density, SolvabilityError, IntegrationError, \
	PeriodicInterpolator, require_same_grid, divergence, integrate, norm
from SubRosa.Subelliptic import solve_poisson, PoissonSolution, DEFAULT_TOLERANCE, SOLVABILITY_TOLERANCE

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

MASS_TOLERANCE: Final[float] = 1e-10
""" Largest admissible difference of the total masses of the two volumes to transport. """

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ REPORT ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class TransportReport:
	"""
	Diagnostics of a transport: pushforward errors against the target in the reference-volume norms, and, when the
	report comes from :py:func:`moser_flow`, the per-solve Poisson diagnostics and path quantities.

	:param l1_error: :math:`\\|\\phi_* \\mu_0 - \\mu_1\\|_{L^1}` of the ratios
	:param l2_error: the same in :math:`L^2`
	:param linf_error: the same in :math:`L^\\infty`
	:param renormalization: the relative mass drift of the reconstruction before renormalization
	:param monge_ampere: the :math:`L^2` norm of :math:`h(\\phi(x)) \\det D\\phi(x) - g(x)`
	:param solves: per Poisson solve, the tuple ``(t, iterations, residual_norm, kernel_defect)``
	:param horizontality_residual: :math:`\\max_t \\|V_t - P^\\tau V_t\\|_\\infty` over the velocity fields used
	:param action: :math:`\\sum_j \\Delta t \\int |V_{t_j}|^2_\\tau \\, d\\mu_{t_j}`
	:param checkpoints: per recorded intermediate time, ``(t, l1, l2, linf)`` against :math:`\\mu_t`
	:param kernel: the reconstruction kernel used
	"""

	def __init__(self, l1_error: float, l2_error: float, linf_error: float, renormalization: float = 0.0,
				 monge_ampere: float = 0.0, solves: Sequence[Tuple[float, int, float, float]] = (),
				 horizontality_residual: float = 0.0, action: float = 0.0,
				 checkpoints: Sequence[Tuple[float, float, float, float]] = (), kernel: str = "scatter"):
		self._l1_error = float(l1_error)
		self._l2_error = float(l2_error)
		self._linf_error = float(linf_error)
		self._renormalization = float(renormalization)
		self._monge_ampere = float(monge_ampere)
		self._solves = tuple(solves)
		self._horizontality_residual = float(horizontality_residual)
		self._action = float(action)
		self._checkpoints = tuple(checkpoints)
		self._kernel = kernel

	@property
	def l1_error(self) -> float:
		return self._l1_error

	@property
	def l2_error(self) -> float:
		return self._l2_error

	@property
	def linf_error(self) -> float:
		return self._linf_error

	@property
	def renormalization(self) -> float:
		return self._renormalization

	@property
	def monge_ampere(self) -> float:
		return self._monge_ampere

	@property
	def solves(self) -> Tuple[Tuple[float, int, float, float], ...]:
		return self._solves

	@property
	def horizontality_residual(self) -> float:
		return self._horizontality_residual

	@property
	def action(self) -> float:
		return self._action

	@property
	def checkpoints(self) -> Tuple[Tuple[float, float, float, float], ...]:
		return self._checkpoints

	@property
	def kernel(self) -> str:
		return self._kernel

	@property
	def total_iterations(self) -> int:
		return sum(s[1] for s in self._solves)

	def with_path(self, solves: Sequence[Tuple[float, int, float, float]], horizontality_residual: float,
				  action: float, checkpoints: Sequence[Tuple[float, float, float, float]]) -> TransportReport:
		""" :return: a copy of this report carrying the given path diagnostics """
		return TransportReport(self._l1_error, self._l2_error, self._linf_error, self._renormalization,
							   self._monge_ampere, solves, horizontality_residual, action, checkpoints, self._kernel)

	def metrics(self) -> Dict[str, float]:
		""" :return: the scalar diagnostics by name, as used for tolerance checks and summary tables """
		return {
				"l1_error":               self._l1_error,
				"l2_error":               self._l2_error,
				"linf_error":             self._linf_error,
				"renormalization":        self._renormalization,
				"monge_ampere":           self._monge_ampere,
				"horizontality_residual": self._horizontality_residual,
				"action":                 self._action,
				"iterations":             float(self.total_iterations),
				}

	def __repr__(self) -> str:
		return repr_string(self, TransportReport.l1_error, TransportReport.l2_error, TransportReport.linf_error,
						   TransportReport.horizontality_residual)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ VELOCITY ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class _Velocity:
	"""
	The horizontal velocity :math:`V = \\sum_i c_i X_i` of one Poisson solve, evaluable at particle positions, together
	with :math:`\\text{div}_\\mu V` for the log-Jacobian.
	"""

	def __init__(self, frame: Frame, coefficients: np.ndarray):
		grid = frame.grid
		self._frame = frame
		self._coefficients = coefficients
		self._grid_field = VectorField(grid, np.sum(coefficients[:, np.newaxis] * frame.coefficients, axis=0))
		self._spline = PeriodicInterpolator(grid, coefficients, order=3)
		self._divergence = PeriodicInterpolator(grid, divergence(self._grid_field).values, order=3)

	@property
	def coefficients(self) -> np.ndarray:
		""" :return: the frame coefficients :math:`c_i` at the nodes, of shape ``(k, *dims)`` """
		return self._coefficients

	@property
	def grid_field(self) -> VectorField:
		return self._grid_field

	def __call__(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
		# (k, m) coefficients and (k, n, m) exact frame values
		c = self._spline(points)
		X = self._frame.evaluate(points)
		return np.sum(c[:, np.newaxis] * X, axis=0).T, self._divergence(points)

def _rk4_step(fields: Sequence[_Velocity], points: np.ndarray, log_jacobian: np.ndarray,
			  dt: float) -> Tuple[np.ndarray, np.ndarray]:
	""" One RK4 step; ``fields`` holds the velocities at the start, the midpoint and the end of the step. """
	start, middle, end = fields
	v1, d1 = start(points)
	v2, d2 = middle(points + 0.5 * dt * v1)
	v3, d3 = middle(points + 0.5 * dt * v2)
	v4, d4 = end(points + dt * v3)
	points = points + dt / 6 * (v1 + 2 * v2 + 2 * v3 + v4)
	log_jacobian = log_jacobian + dt / 6 * (d1 + 2 * d2 + 2 * d3 + d4)
	return points, log_jacobian

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ TRANSPORT ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def segment_density(mu0: Density, mu1: Density, t: float) -> Density:
	""" :return: :math:`\\mu_t = \\mu_0 + t(\\mu_1 - \\mu_0)`, positive for ``t`` in ``[0, 1]`` """
	return Density(mu0.grid, mu0.ratio + t * (mu1.ratio - mu0.ratio))

def verify_transport(flow: FlowMap, mu0: Density, mu1: Density, kernel: Kernel = "scatter") -> TransportReport:
	"""
	Compares :math:`\\phi_* \\mu_0` against :math:`\\mu_1` in :math:`L^1`, :math:`L^2` and :math:`L^\\infty`, and
	evaluates the Monge–Ampère residual :math:`\\text{ratio}_1(\\phi(x)) \\det D\\phi(x) - \\text{ratio}_0(x)`. The target
	is sampled linearly for the ``scatter`` kernel and with cubic splines for ``pullback``, matching the order of the
	reconstruction.

	:raise StructuralError: if the arguments live on different grids
	"""
	grid = require_same_grid(flow.grid, mu0, mu1)
	ratio, drift = deposit_density(flow, mu0, kernel)
	pushed = ratio * (mu0.mass / np.mean(ratio))
	difference = ScalarField(grid, pushed - mu1.ratio)
	residual = monge_ampere_residual(flow, mu0.field, mu1.field, 3 if kernel == "pullback" else 1)
	return TransportReport(norm(difference, "l1"), norm(difference, "l2"), norm(difference, "linf"), drift,
						   norm(residual, "l2"), kernel=kernel)

def moser_flow(mu0: Density, mu1: Density, frame: Frame, steps: int, tol: float = DEFAULT_TOLERANCE, *,
			   stage_solves: bool = False, checkpoints: Sequence[float] = (), t_stop: float = 1.0,
			   kernel: Kernel = "scatter", preconditioned: bool = False,
			   threads: int = 1) -> Tuple[FlowMap, TransportReport]:
	"""
	Integrates the nonholonomic Moser flow from :math:`\\mu_0` towards :math:`\\mu_1`.

	:param mu0: the initial volume
	:param mu1: the target volume, of the same total mass
	:param frame: the horizontal frame
	:param steps: the number of substeps covering ``[0, 1]``
	:param tol: the relative tolerance of every Poisson solve
	:param stage_solves: keyword-only, whether to solve at every distinct RK4 stage time instead of once per substep
	:param checkpoints: keyword-only, intermediate times (rounded to substep boundaries) at which the pushforward is
		compared against :math:`\\mu_t`
	:param t_stop: keyword-only, stops the integration early at this time (rounded to a substep boundary)
	:param kernel: keyword-only, the reconstruction kernel for the reported errors
	:param preconditioned: keyword-only, whether the Poisson solves use the Jacobi preconditioner
	:param threads: keyword-only, the number of particle chunks advanced concurrently

	:return: the flow map at ``t_stop`` and the :py:class:`TransportReport` against :math:`\\mu_1`

	:raise SolvabilityError: if the masses differ by more than :py:data:`MASS_TOLERANCE`, or a substep source fails
		the zero-mean check
	:raise ConvergenceError: if a Poisson solve fails
	:raise IntegrationError: if a particle state stops being finite
	"""
	grid = require_same_grid(mu0, mu1, frame.grid)
	if steps < 1:
		raise ValueError(f"At least one step is needed, received {steps}")
	if abs(mu0.mass - mu1.mass) > MASS_TOLERANCE:
		raise SolvabilityError(f"Volumes to transport differ in total mass by {abs(mu0.mass - mu1.mass):.3e}",
							   (mu0, mu1))

	dt = 1.0 / steps
	n_steps = int(round(t_stop * steps))
	checkpoint_steps = {int(round(t * steps)): t for t in checkpoints}
	solves: List[Tuple[float, int, float, float]] = list()
	recorded: List[Tuple[float, float, float, float]] = list()
	# velocities keyed by half-substep index
	cache: Dict[int, _Velocity] = dict()
	horizontality = 0.0
	action = 0.0

	def velocity(half: int) -> _Velocity:
		nonlocal horizontality
		if half in cache:
			return cache[half]
		t = 0.5 * half * dt
		nu = segment_density(mu0, mu1, t)
		rho = ScalarField(grid, (mu0.ratio - mu1.ratio) / nu.ratio)
		mean = integrate(rho, nu)
		if abs(mean) > SOLVABILITY_TOLERANCE:
			raise SolvabilityError(f"Source at t={t:.4f} has nonzero integral {mean:.3e}", rho)
		solution: PoissonSolution = solve_poisson(rho, frame, nu, tol, preconditioned=preconditioned)
		solves.append((t, solution.iterations, solution.residual_norm, solution.kernel_defect))
		field = _Velocity(frame, horizontal_coefficients(solution.u, frame))
		horizontality = max(horizontality, norm(field.grid_field - project_tau(field.grid_field, frame), "linf"))
		cache[half] = field
		return field

	points = grid.points()
	log_jacobian = np.zeros(grid.size)
	for j in range(n_steps):
		middle = velocity(2 * j + 1)
		fields = (velocity(2 * j), middle, velocity(2 * j + 2)) if stage_solves else (middle, middle, middle)
		for key in [k for k in cache if k < 2 * j + 2]:
			del cache[key]
		nu_mid = segment_density(mu0, mu1, (j + 0.5) * dt)
		action += dt * integrate(ScalarField(grid, np.sum(middle.coefficients ** 2, axis=0)), nu_mid)

		points, log_jacobian = advance_particles(lambda p, l: _rk4_step(fields, p, l, dt), points, log_jacobian,
												 threads=threads)
		if not (np.all(np.isfinite(points)) and np.all(np.isfinite(log_jacobian))):
			raise IntegrationError(f"Particle state became non-finite in substep {j + 1}", frame)
		points = grid.wrap(points)

		if (j + 1) in checkpoint_steps:
			t_check = (j + 1) * dt
			report = verify_transport(FlowMap(grid, points, log_jacobian, t_check), mu0,
									  segment_density(mu0, mu1, t_check), kernel)
			recorded.append((t_check, report.l1_error, report.l2_error, report.linf_error))
		if steps >= 10 and (j + 1) % (steps // 10) == 0:
			logger.info("Moser flow: substep %d of %d done", j + 1, n_steps)

	flow = FlowMap(grid, points, log_jacobian, n_steps * dt)
	report = verify_transport(flow, mu0, mu1, kernel).with_path(solves, horizontality, action, recorded)
	logger.info("Moser flow finished: %d solves, %d CG iterations, l2 error %.3e", len(solves),
				report.total_iterations, report.l2_error)
	return flow, report
