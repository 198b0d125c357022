"""
:Date: 11.10.2026

.. versionadded:: v0.1.0

The nonholonomic heat equation :math:`\\partial_t u = \\Delta^\\tau u`, the relative entropy
:math:`\\text{Ent}(\\nu) = \\int \\log(\\nu / \\mu) \\, \\nu`, the nonholonomic Wasserstein metric on tangent densities,
and the numerical check that heat flow is the gradient flow of the entropy for that metric.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import logging
from typing import List, Tuple, Sequence, Optional, Literal, Final, Dict, final

import numpy as np
from scipy import linalg
from SEPModules.SEPPrinting import repr_string

from SubRosa.Distribution import Frame, horizontal_coefficients
from SubRosa.GridBase import ScalarField, Density, StructuralError, SolvabilityError, PositivityError, \
	require_same_grid, integrate, norm
from SubRosa.Subelliptic import sub_laplacian, solve_poisson, conjugate_gradient, default_iteration_cap, \
	DEFAULT_TOLERANCE

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

ENTROPY_FLOOR: Final[float] = 1e-12
""" Density ratios at or below this value are treated as a loss of positivity. """

TANGENT_TOLERANCE: Final[float] = 1e-12
""" Largest admissible :math:`|\\int \\eta \\, d\\mu|` of a tangent density, relative to its size. """

Stepper: Final = Literal["cn", "rk4"]
""" Type alias for the heat steppers: implicit midpoint (Crank–Nicolson) or explicit RK4. """

Trajectory: Final = List[Tuple[float, Density]]

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ ENTROPY ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _require_positive(nu: Density, time: Optional[float] = None) -> None:
	minimum = float(np.min(nu.ratio))
	if minimum <= ENTROPY_FLOOR:
		where = "" if time is None else f" at t={time:g}"
		raise PositivityError(f"Density ratio dropped to {minimum:.3e}{where}", nu, time)

def entropy(nu: Density) -> float:
	"""
	:math:`\\text{Ent}(\\nu) = \\int \\log(\\text{ratio}) \\, \\text{ratio} \\, d\\mu` by quadrature. Nonnegative for
	normalized densities.

	:raise PositivityError: if a ratio value is at or below :py:data:`ENTROPY_FLOOR`
	"""
	_require_positive(nu)
	return float(np.sum(np.log(nu.ratio) * nu.ratio) * nu.grid.weight)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ HEAT FLOW ~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def heat_evolve(nu0: Density, t_max: float, dt: float, frame: Frame, times: Optional[Sequence[float]] = None,
				stepper: Stepper = "cn", tol: float = 1e-12) -> Trajectory:
	"""
	Evolves the ratio by :math:`\\partial_t u = \\Delta^\\tau_\\mu u`.

	The default stepper is the implicit midpoint rule
	:math:`(I - \\frac{dt}{2} \\Delta) u^{n+1} = (I + \\frac{dt}{2} \\Delta) u^n`, solved by conjugate gradients
	started from :math:`u^n`, which is unconditionally stable. ``stepper="rk4"`` selects classical explicit RK4, which
	is only stable for ``dt`` of the order :math:`h^2`. The sub-Laplacian has mean-zero output, so neither
	stepper changes the mass beyond round-off, whatever the solver tolerance; it is not corrected afterwards.

	:param nu0: the initial density
	:param t_max: the final time
	:param dt: the nominal step, adjusted to divide ``t_max``
	:param frame: the horizontal frame
	:param times: the snapshot times (rounded to steps), defaults to every step
	:param stepper: ``"cn"`` or ``"rk4"``
	:param tol: the relative residual tolerance of the implicit solves

	:return: ``(t, density)`` snapshots, starting with ``(0, nu0)``

	:raise PositivityError: if a ratio drops to :py:data:`ENTROPY_FLOOR` or below, with the offending time
	:raise ConvergenceError: if an implicit solve fails
	"""
	grid = require_same_grid(nu0, frame.grid)
	if not dt > 0:
		raise ValueError(f"Time step must be positive, received {dt}")
	if stepper not in ("cn", "rk4"):
		raise NotImplementedError(f"Stepper {stepper!r} is not known, choose from: cn, and rk4")
	steps = max(int(round(t_max / dt)), 1) if t_max > 0 else 0
	h = t_max / steps if steps else dt
	wanted = set(range(steps + 1)) if times is None else {int(round(t / h)) for t in times if 0 <= t <= t_max}
	weights = np.full(grid.dims, grid.weight)
	cap = default_iteration_cap(grid)

	def laplacian(values: np.ndarray) -> np.ndarray:
		return sub_laplacian(ScalarField(grid, values), frame).values

	u = nu0.ratio.copy()
	trajectory: Trajectory = [(0.0, nu0)]
	for j in range(1, steps + 1):
		if stepper == "cn":
			rhs = u + 0.5 * h * laplacian(u)
			u, _, _ = conjugate_gradient(lambda v: v - 0.5 * h * laplacian(v), rhs, weights, tol, cap, x0=u)
		else:
			k1 = laplacian(u)
			k2 = laplacian(u + 0.5 * h * k1)
			k3 = laplacian(u + 0.5 * h * k2)
			k4 = laplacian(u + h * k3)
			u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
		t = j * h
		minimum = float(np.min(u))
		if not minimum > ENTROPY_FLOOR:
			raise PositivityError(f"Heat flow lost positivity at t={t:g}, minimum ratio {minimum:.3e}", nu0, t)
		if j in wanted:
			trajectory.append((t, Density(grid, u)))
	logger.info("Heat flow to t=%g in %d %s steps", t_max, steps, stepper)
	return trajectory

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ WASSERSTEIN METRIC ~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class TangentDensity:
	"""
	A tangent vector :math:`\\eta = \\text{eta} \\cdot \\mu` at the density ``base``; admissible tangent vectors carry
	no mass.

	:param base: the base density :math:`\\nu`
	:param eta: the ratio of :math:`\\eta` against the reference volume

	:raise StructuralError: if ``base`` and ``eta`` live on different grids
	:raise SolvabilityError: if :math:`|\\int \\text{eta} \\, d\\mu|` exceeds :py:data:`TANGENT_TOLERANCE` relative to
		:math:`\\max(1, \\|\\text{eta}\\|_\\infty)`
	"""

	def __init__(self, base: Density, eta: ScalarField):
		require_same_grid(base, eta)
		mass = integrate(eta)
		if abs(mass) > TANGENT_TOLERANCE * max(1.0, norm(eta, "linf")):
			raise SolvabilityError(f"Tangent densities must have zero mass, received {mass:.3e}", eta)
		self._base = base
		self._eta = eta

	@property
	def base(self) -> Density:
		return self._base

	@property
	def eta(self) -> ScalarField:
		return self._eta

	def __repr__(self) -> str:
		return repr_string(self, TangentDensity.base)

def _require_same_base(v1: TangentDensity, v2: TangentDensity) -> Density:
	require_same_grid(v1.base, v2.base)
	if v1.base is not v2.base and not np.array_equal(v1.base.ratio, v2.base.ratio):
		raise StructuralError("Tangent densities live at different base densities", (v1, v2))
	return v1.base

def metric_potential(v: TangentDensity, frame: Frame, tol: float = DEFAULT_TOLERANCE) -> ScalarField:
	""" :return: the potential ``f`` solving :math:`-\\Delta^\\tau_\\nu f = \\eta / \\nu` with ``nu = v.base`` """
	nu = v.base
	rho = ScalarField(nu.grid, -v.eta.values / nu.ratio)
	return solve_poisson(rho, frame, nu, tol).u

def wasserstein_metric(v1: TangentDensity, v2: TangentDensity, frame: Frame,
					   tol: float = DEFAULT_TOLERANCE) -> float:
	"""
	The nonholonomic Wasserstein metric :math:`\\int \\langle \\nabla^\\tau f_1, \\nabla^\\tau f_2 \\rangle_\\tau \\, d\\nu`
	with the potentials of :py:func:`metric_potential`. The subriemannian inner product of the frame-orthonormal
	horizontal gradients is the sum of the products of their frame coefficients.

	:raise StructuralError: if the two tangent vectors live at different base densities
	"""
	nu = _require_same_base(v1, v2)
	c1 = horizontal_coefficients(metric_potential(v1, frame, tol), frame)
	c2 = c1 if v2 is v1 else horizontal_coefficients(metric_potential(v2, frame, tol), frame)
	return integrate(ScalarField(nu.grid, np.sum(c1 * c2, axis=0)), nu)

def metric_coercivity(frame: Frame, nu: Density, max_mode: int = 1, tol: float = DEFAULT_TOLERANCE) -> float:
	"""
	The smallest value of :math:`\\langle \\eta, \\eta \\rangle_{\\mathcal{W}} / \\|\\eta\\|^2_{L^2}` over the span of
	the real Fourier modes with frequencies up to ``max_mode`` per axis, computed as the smallest generalized
	eigenvalue of the metric Gram matrix against the :math:`L^2` Gram matrix.

	:return: a positive number when the metric is uniformly positive on that subspace
	"""
	grid = require_same_grid(frame.grid, nu)
	mesh = grid.mesh()
	frequencies = [k for k in np.ndindex(*(2 * max_mode + 1,) * grid.ndim)]
	frequencies = [np.asarray(k) - max_mode for k in frequencies]
	# one of each pair k, -k
	frequencies = [k for k in frequencies if tuple(k) > tuple(-k)]
	modes = list()
	for k in frequencies:
		phase = sum(2 * np.pi * k[a] * mesh[a] / grid.period[a] for a in range(grid.ndim))
		modes.extend((np.cos(phase), np.sin(phase)))

	coefficients = list()
	for eta in modes:
		f = metric_potential(TangentDensity(nu, ScalarField(grid, eta - np.mean(eta))), frame, tol)
		coefficients.append(horizontal_coefficients(f, frame))
	size = len(modes)
	metric = np.empty((size, size))
	gram = np.empty((size, size))
	for a in range(size):
		for b in range(a, size):
			metric[a, b] = metric[b, a] = integrate(ScalarField(grid, np.sum(coefficients[a] * coefficients[b],
																			 axis=0)), nu)
			gram[a, b] = gram[b, a] = float(np.mean(modes[a] * modes[b]))
	smallest = float(linalg.eigh(metric, gram, eigvals_only=True)[0])
	logger.debug("Metric coercivity over %d modes: %.3e", size, smallest)
	return smallest

def path_action(trajectory: Trajectory, frame: Frame, tol: float = DEFAULT_TOLERANCE) -> float:
	"""
	The kinetic energy :math:`\\sum_j \\Delta t_j \\|\\partial_t \\nu\\|^2_{\\mathcal{W}}` of a density path, with the
	velocity taken as the forward difference and the base as the average of the two neighboring densities.
	"""
	total = 0.0
	for (t0, nu0), (t1, nu1) in zip(trajectory[:-1], trajectory[1:]):
		dt = t1 - t0
		eta = (nu1.ratio - nu0.ratio) / dt
		base = Density(nu0.grid, 0.5 * (nu0.ratio + nu1.ratio))
		v = TangentDensity(base, ScalarField(nu0.grid, eta - np.mean(eta)))
		total += dt * wasserstein_metric(v, v, frame, tol)
	return total

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GRADIENT FLOW ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class GradientFlowReport:
	"""
	Result of :py:func:`gradient_flow_check`. Per interior snapshot it holds the entropy rate :math:`d\\text{Ent}/dt`,
	the negative squared metric speed :math:`-\\|\\partial_t \\nu\\|^2_{\\mathcal{W}}`, their gap, and the residual of
	the two-Laplacian identity :math:`\\Delta^\\tau_\\nu(\\log \\text{ratio}) \\, \\text{ratio} = \\Delta^\\tau_\\mu \\text{ratio}`.
	"""

	def __init__(self, times: Sequence[float], entropies: Sequence[float], entropy_rates: Sequence[float],
				 metric_values: Sequence[float], identity_residuals: Sequence[float], mass_drifts: Sequence[float]):
		self._times = tuple(times)
		self._entropies = tuple(entropies)
		self._entropy_rates = tuple(entropy_rates)
		self._metric_values = tuple(metric_values)
		self._identity_residuals = tuple(identity_residuals)
		self._mass_drifts = tuple(mass_drifts)

	@property
	def times(self) -> Tuple[float, ...]:
		""" :return: all snapshot times """
		return self._times

	@property
	def entropies(self) -> Tuple[float, ...]:
		""" :return: the entropy at every snapshot """
		return self._entropies

	@property
	def entropy_rates(self) -> Tuple[float, ...]:
		""" :return: the central difference rate at every interior snapshot """
		return self._entropy_rates

	@property
	def metric_values(self) -> Tuple[float, ...]:
		""" :return: :math:`-\\|\\partial_t \\nu\\|^2_{\\mathcal{W}}` at every interior snapshot """
		return self._metric_values

	@property
	def identity_residuals(self) -> Tuple[float, ...]:
		return self._identity_residuals

	@property
	def mass_drifts(self) -> Tuple[float, ...]:
		""" :return: :math:`|\\text{mass}(\\nu_t) - \\text{mass}(\\nu_0)|` at every snapshot """
		return self._mass_drifts

	@property
	def gaps(self) -> Tuple[float, ...]:
		return tuple(abs(a - b) for a, b in zip(self._entropy_rates, self._metric_values))

	@property
	def max_gap(self) -> float:
		return max(self.gaps, default=0.0)

	@property
	def max_identity_residual(self) -> float:
		return max(self._identity_residuals, default=0.0)

	@property
	def monotone(self) -> bool:
		""" :return: whether the entropy never increases by more than :py:data:`ENTROPY_FLOOR` between snapshots """
		return all(b <= a + ENTROPY_FLOOR for a, b in zip(self._entropies[:-1], self._entropies[1:]))

	def metrics(self) -> Dict[str, float]:
		return {
				"max_gap":               self.max_gap,
				"max_identity_residual": self.max_identity_residual,
				"max_mass_drift":        max(self._mass_drifts, default=0.0),
				"final_entropy":         self._entropies[-1] if self._entropies else 0.0,
				"monotone":              float(self.monotone),
				}

	def __repr__(self) -> str:
		return repr_string(self, GradientFlowReport.max_gap, GradientFlowReport.max_identity_residual,
						   GradientFlowReport.monotone)

def identity_residual(nu: Density, frame: Frame) -> float:
	""" :return: :math:`\\|\\Delta^\\tau_\\nu(\\log \\text{ratio}) \\cdot \\text{ratio} - \\Delta^\\tau_\\mu \\text{ratio}\\|_2` """
	_require_positive(nu)
	weighted = sub_laplacian(ScalarField(nu.grid, np.log(nu.ratio)), frame, nu).values * nu.ratio
	plain = sub_laplacian(nu.field, frame).values
	return norm(weighted - plain, "l2", grid=nu.grid)

def gradient_flow_check(trajectory: Trajectory, frame: Frame, tol: float = DEFAULT_TOLERANCE) -> GradientFlowReport:
	"""
	Verifies numerically that a heat trajectory follows the entropy gradient flow: at every interior snapshot the
	entropy rate and :math:`\\eta_t = \\partial_t \\nu_t` are formed by central differences, and
	:math:`d\\text{Ent}/dt` is compared with :math:`-\\|\\eta_t\\|^2_{\\mathcal{W}}`.

	:raise StructuralError: if fewer than 3 snapshots are given
	"""
	if len(trajectory) < 3:
		raise StructuralError("A gradient flow check needs at least 3 snapshots", trajectory)
	times = [t for t, _ in trajectory]
	entropies = [entropy(nu) for _, nu in trajectory]
	mass0 = trajectory[0][1].mass
	drifts = [abs(nu.mass - mass0) for _, nu in trajectory]

	rates, metric_values, residuals = list(), list(), list()
	for j in range(1, len(trajectory) - 1):
		span = times[j + 1] - times[j - 1]
		nu = trajectory[j][1]
		rates.append((entropies[j + 1] - entropies[j - 1]) / span)
		eta = (trajectory[j + 1][1].ratio - trajectory[j - 1][1].ratio) / span
		v = TangentDensity(nu, ScalarField(nu.grid, eta - np.mean(eta)))
		metric_values.append(-wasserstein_metric(v, v, frame, tol))
		residuals.append(identity_residual(nu, frame))
	return GradientFlowReport(times, entropies, rates, metric_values, residuals, drifts)
