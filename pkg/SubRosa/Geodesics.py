"""
:Date: 09.10.2026

.. versionadded:: v0.1.0

Subriemannian Hamiltonian mechanics on the cotangent bundle of the torus. The Hamiltonian of a frame that is
orthonormal for the subriemannian metric is

..	math:: H^\\tau(q, p) = \\frac{1}{2} \\sum_i (p \\cdot X_i(q))^2,

with :math:`\\dot q = \\sum_i (p \\cdot X_i) X_i` and :math:`\\dot p_b = -\\sum_i (p \\cdot X_i)(p \\cdot \\partial_b X_i)`.
The frame derivatives come from its closed-form expressions, never from grid stencils, since particles live off the
grid. Everything is integrated with classical RK4 on arrays of particles; every arithmetic operation acts
elementwise along the particle axis, so one particle integrated alone and inside an ensemble agree bit for bit.

Built on these trajectories are the horizontal exponential of exact differentials, Hamilton–Jacobi transport by
characteristics, displacement interpolation of densities, and Burgers and Monge–Ampère residual diagnostics.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import logging
from typing import Sequence, Tuple, List, Optional, Final, final

import numpy as np
from SEPModules.SEPPrinting import repr_string

from SubRosa.Distribution import Frame, horizontal_coefficients
from SubRosa.FlowBase import FlowMap, Kernel, lattice_log_jacobian, pushforward_density, pullback_values, \
	advance_particles
from SubRosa.GridBase import Grid, ScalarField, Density, StructuralError, IntegrationError, require_same_grid, \
	grad, difference, sample, norm

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

ENERGY_FLOOR: Final[float] = 1e-14
""" Lower bound of the reference energy in relative drift measurements. """

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ COTANGENT STATE ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class CotangentState:
	"""
	A covector :math:`p \\in T^*_q M` at a point of the torus.

	:param q: the base point coordinates
	:param p: the covector components in the coordinate basis
	:param grid: optional grid whose periods ``q`` is wrapped with

	:raise StructuralError: if ``q`` and ``p`` differ in length
	:raise IntegrationError: if a component is not finite
	"""

	def __init__(self, q: Sequence[float], p: Sequence[float], grid: Optional[Grid] = None):
		q = np.array(q, dtype=np.float64)
		p = np.array(p, dtype=np.float64)
		if q.shape != p.shape or q.ndim != 1:
			raise StructuralError(f"Point and covector must be vectors of one length, received {q.shape} and "
								  f"{p.shape}", (q, p))
		if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
			raise IntegrationError("Cotangent state is not finite", (q, p))
		if grid is not None:
			q = grid.wrap(q)
		q.setflags(write=False)
		p.setflags(write=False)
		self._q = q
		self._p = p

	@property
	def q(self) -> np.ndarray:
		return self._q

	@property
	def p(self) -> np.ndarray:
		return self._p

	def __eq__(self, other) -> bool:
		return isinstance(other, CotangentState) and np.array_equal(self._q, other._q) \
			   and np.array_equal(self._p, other._p)

	def __hash__(self) -> int:
		return hash((self._q.tobytes(), self._p.tobytes()))

	def __repr__(self) -> str:
		return repr_string(self, CotangentState.q, CotangentState.p)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ HAMILTONIAN ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _frame_pairings(frame: Frame, q: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
	""" :return: the pairings :math:`p \\cdot X_i(q)` of shape ``(k, m)`` and the frame values ``(k, n, m)`` """
	X = frame.evaluate(q)
	s = np.empty((frame.rank, q.shape[0]))
	for i in range(frame.rank):
		acc = p[:, 0] * X[i, 0]
		for a in range(1, q.shape[1]):
			acc = acc + p[:, a] * X[i, a]
		s[i] = acc
	return s, X

def hamiltonian(frame: Frame, q: np.ndarray, p: np.ndarray) -> np.ndarray:
	""" :return: :math:`H^\\tau` for particle arrays ``q, p`` of shape ``(m, n)``, as an array of shape ``(m,)`` """
	s, _ = _frame_pairings(frame, q, p)
	energy = 0.5 * s[0] * s[0]
	for i in range(1, frame.rank):
		energy = energy + 0.5 * s[i] * s[i]
	return energy

def hamiltonian_vector_field(frame: Frame, q: np.ndarray, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
	""" :return: :math:`(\\dot q, \\dot p)` for particle arrays of shape ``(m, n)`` """
	s, X = _frame_pairings(frame, q, p)
	J = frame.jacobian(q)
	n = q.shape[1]
	q_dot = np.zeros_like(q)
	p_dot = np.zeros_like(p)
	for i in range(frame.rank):
		for a in range(n):
			q_dot[:, a] = q_dot[:, a] + s[i] * X[i, a]
		for b in range(n):
			pairing = p[:, 0] * J[i, 0, b]
			for a in range(1, n):
				pairing = pairing + p[:, a] * J[i, a, b]
			p_dot[:, b] = p_dot[:, b] - s[i] * pairing
	return q_dot, p_dot

def sub_hamiltonian(state: CotangentState, frame: Frame) -> float:
	"""
	:math:`H^\\tau = \\frac{1}{2} \\sum_i (p \\cdot X_i(q))^2`, with the frame evaluated exactly at ``q``. This is
	:math:`\\frac{1}{2} |I p|^2_\\tau` for the sharp map :math:`I p = \\sum_i (p \\cdot X_i) X_i`.
	"""
	return float(hamiltonian(frame, state.q[np.newaxis], state.p[np.newaxis])[0])

def _rk4(frame: Frame, q: np.ndarray, p: np.ndarray, action: np.ndarray,
		 dt: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
	""" One RK4 step of Hamilton's equations, together with the action :math:`\\dot S = p \\cdot \\dot q - H = H`. """
	q1, p1 = hamiltonian_vector_field(frame, q, p)
	s1 = hamiltonian(frame, q, p)
	q2, p2 = hamiltonian_vector_field(frame, q + 0.5 * dt * q1, p + 0.5 * dt * p1)
	s2 = hamiltonian(frame, q + 0.5 * dt * q1, p + 0.5 * dt * p1)
	q3, p3 = hamiltonian_vector_field(frame, q + 0.5 * dt * q2, p + 0.5 * dt * p2)
	s3 = hamiltonian(frame, q + 0.5 * dt * q2, p + 0.5 * dt * p2)
	q4, p4 = hamiltonian_vector_field(frame, q + dt * q3, p + dt * p3)
	s4 = hamiltonian(frame, q + dt * q3, p + dt * p3)
	return q + dt / 6 * (q1 + 2 * q2 + 2 * q3 + q4), \
		   p + dt / 6 * (p1 + 2 * p2 + 2 * p3 + p4), \
		   action + dt / 6 * (s1 + 2 * s2 + 2 * s3 + s4)

def _step_count(t: float, dt: float) -> int:
	if not dt > 0:
		raise ValueError(f"Time step must be positive, received {dt}")
	if t < 0:
		raise ValueError(f"Integration time must not be negative, received {t}")
	return max(1, int(round(t / dt))) if t > 0 else 0

def integrate_particles(frame: Frame, q: np.ndarray, p: np.ndarray, t: float, dt: float,
						action: Optional[np.ndarray] = None,
						threads: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
	"""
	Integrates Hamilton's equations for an array of particles over time ``t``. The step is adjusted to divide ``t``
	evenly, i.e. ``round(t / dt)`` steps are taken, and at least one for ``t > 0``.

	:param frame: the horizontal frame
	:param q: the unwrapped positions, of shape ``(m, n)``
	:param p: the covectors, of shape ``(m, n)``
	:param t: the integration time
	:param dt: the nominal step
	:param action: the accumulated action to continue from, zeros by default
	:param threads: the number of particle chunks integrated concurrently

	:return: the unwrapped positions, the covectors and the accumulated action :math:`\\int H \\, dt`

	:raise IntegrationError: if a particle state stops being finite
	"""
	steps = _step_count(t, dt)
	action = np.zeros(q.shape[0]) if action is None else action
	if steps == 0:
		return q, p, action
	h = t / steps

	def run(q: np.ndarray, p: np.ndarray, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
		for _ in range(steps):
			q, p, s = _rk4(frame, q, p, s, h)
		return q, p, s

	q, p, action = advance_particles(run, q, p, action, threads=threads)
	if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
		raise IntegrationError(f"Hamiltonian integration produced non-finite states within t={t}", frame)
	return q, p, action

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GEODESICS ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class GeodesicTrajectory:
	"""
	A sampled normal geodesic together with its energy record.

	:param times: the sample times, of shape ``(s,)``
	:param q: the wrapped positions, of shape ``(s, n)``
	:param p: the covectors, of shape ``(s, n)``
	:param hamiltonian_values: :math:`H^\\tau` at every sample
	"""

	def __init__(self, times: np.ndarray, q: np.ndarray, p: np.ndarray, hamiltonian_values: np.ndarray):
		self._times = np.asarray(times, dtype=np.float64)
		self._q = np.asarray(q, dtype=np.float64)
		self._p = np.asarray(p, dtype=np.float64)
		self._hamiltonian_values = np.asarray(hamiltonian_values, dtype=np.float64)
		for a in (self._times, self._q, self._p, self._hamiltonian_values):
			a.setflags(write=False)

	@property
	def times(self) -> np.ndarray:
		return self._times

	@property
	def q(self) -> np.ndarray:
		return self._q

	@property
	def p(self) -> np.ndarray:
		return self._p

	@property
	def hamiltonian_values(self) -> np.ndarray:
		return self._hamiltonian_values

	@property
	def states(self) -> List[CotangentState]:
		return [CotangentState(q, p) for q, p in zip(self._q, self._p)]

	@property
	def endpoint(self) -> CotangentState:
		""" :return: the final state; its base point is :math:`\\exp^\\tau(t p_0)` """
		return CotangentState(self._q[-1], self._p[-1])

	@property
	def energy_drift(self) -> float:
		""" :return: :math:`\\max_t |H(t) - H(0)| / \\max(H(0), \\varepsilon)` """
		h0 = self._hamiltonian_values[0]
		return float(np.max(np.abs(self._hamiltonian_values - h0)) / max(h0, ENERGY_FLOOR))

	def __len__(self) -> int:
		return self._times.size

	def __repr__(self) -> str:
		return repr_string(self, GeodesicTrajectory.endpoint, GeodesicTrajectory.energy_drift)

def exp_tau(q0: Sequence[float], p0: Sequence[float], t: float, frame: Frame, dt: float) -> GeodesicTrajectory:
	"""
	Integrates the normal geodesic with initial covector ``p0`` at ``q0`` for time ``t`` with RK4, recording every
	step. The endpoint projection is the subriemannian exponential :math:`\\exp^\\tau(t p_0)`.

	:raise ValueError: if ``dt`` is not positive
	:raise IntegrationError: if the state stops being finite
	"""
	grid = frame.grid
	start = CotangentState(q0, p0)
	if start.q.size != grid.ndim:
		raise StructuralError(f"Expected a point with {grid.ndim} coordinates, received {start.q.size}", start)
	steps = _step_count(t, dt)
	q, p = start.q[np.newaxis].copy(), start.p[np.newaxis].copy()
	action = np.zeros(1)
	times, qs, ps, energies = [0.0], [q[0]], [p[0]], [hamiltonian(frame, q, p)[0]]
	for j in range(steps):
		q, p, action = _rk4(frame, q, p, action, t / steps)
		if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
			raise IntegrationError(f"Geodesic state became non-finite at t={(j + 1) * t / steps}", start)
		times.append((j + 1) * t / steps)
		qs.append(q[0])
		ps.append(p[0])
		energies.append(hamiltonian(frame, q, p)[0])
	trajectory = GeodesicTrajectory(np.asarray(times), grid.wrap(np.asarray(qs)), np.asarray(ps), np.asarray(energies))
	logger.debug("Geodesic over t=%g in %d steps, relative energy drift %.3e", t, steps, trajectory.energy_drift)
	return trajectory

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ HORIZONTAL EXPONENTIAL ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def characteristic_flow(grid: Grid, momenta: np.ndarray, t: float, frame: Frame, dt: float,
						threads: int = 1) -> Tuple[FlowMap, np.ndarray]:
	"""
	Integrates one particle per node with the given initial covectors and assembles the time-``t`` map. The
	log-Jacobian is :math:`\\log |\\det D\\phi|` from central differences of the particle displacement over
	neighboring seeds (see :py:func:`.lattice_log_jacobian`), which also sets the shock flag.

	:param grid: the seed grid
	:param momenta: the initial covectors, of shape ``(size, ndim)``
	:param t: the flow time
	:param frame: the horizontal frame
	:param dt: the nominal RK4 step
	:param threads: the number of particle chunks integrated concurrently

	:return: the flow map (carrying the particle velocities :math:`\\dot q`) and the accumulated action per seed
	"""
	require_same_grid(grid, frame.grid)
	seeds = grid.points()
	q, p, action = integrate_particles(frame, seeds, np.asarray(momenta, dtype=np.float64), t, dt, threads=threads)
	velocities, _ = hamiltonian_vector_field(frame, q, p)
	displacement = grid.minimal_image(q - seeds).T.reshape((grid.ndim, *grid.dims))
	log_jacobian, shock = lattice_log_jacobian(grid, displacement)
	return FlowMap(grid, q, log_jacobian, t, velocities=velocities, shock=shock), action

def horizontal_exponential(f: ScalarField, t: float, frame: Frame, dt: float, threads: int = 1) -> FlowMap:
	"""
	The horizontal exponential :math:`\\overline{\\exp^\\tau}(t \\nabla^\\tau f)`: every node ``x`` is seeded with the
	exact differential :math:`p = df(x)` (central stencil) and moved along its normal geodesic for time ``t``. The
	initial particle velocity is :math:`I\\, df = \\nabla^\\tau f` at the seed.

	:raise IntegrationError: on non-finite particle states
	"""
	require_same_grid(f, frame.grid)
	momenta = grad(f).components.reshape((f.grid.ndim, -1)).T
	flow, _ = characteristic_flow(f.grid, momenta, t, frame, dt, threads)
	return flow

def displacement_interpolation(nu: Density, f: ScalarField, t: float, frame: Frame, dt: float,
							   kernel: Kernel = "scatter", threads: int = 1) -> Density:
	""" :return: :math:`(\\overline{\\exp^\\tau}(t \\nabla^\\tau f))_* \\nu`, see :py:func:`.pushforward_density` """
	require_same_grid(nu, f)
	return pushforward_density(horizontal_exponential(f, t, frame, dt, threads), nu, kernel)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ HAMILTON-JACOBI ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class PotentialPath:
	"""
	Solution of :math:`\\dot f_t + H^\\tau(df_t) = 0` by characteristics, sampled at a list of times.

	:param times: the sample times, starting at 0
	:param fields: the potential on the grid per sample time; the first one is the input potential
	:param shock_flags: per sample time, whether the characteristics had crossed
	:param transport_residual: per sample time, :math:`\\max_x |S(x) - t H_0(x)|` between the integrated action and
		the conserved-energy prediction
	"""

	def __init__(self, times: Sequence[float], fields: Sequence[ScalarField], shock_flags: Sequence[bool],
				 transport_residual: Sequence[float]):
		self._times = tuple(float(t) for t in times)
		self._fields = tuple(fields)
		self._shock_flags = tuple(bool(s) for s in shock_flags)
		self._transport_residual = tuple(float(r) for r in transport_residual)

	@property
	def times(self) -> Tuple[float, ...]:
		return self._times

	@property
	def fields(self) -> Tuple[ScalarField, ...]:
		return self._fields

	@property
	def shock_flags(self) -> Tuple[bool, ...]:
		return self._shock_flags

	@property
	def transport_residual(self) -> Tuple[float, ...]:
		return self._transport_residual

	@property
	def first_shock(self) -> Optional[float]:
		""" :return: the first sample time with a shock flag, or ``None`` """
		return next((t for t, s in zip(self._times, self._shock_flags) if s), None)

	def __len__(self) -> int:
		return len(self._times)

	def __repr__(self) -> str:
		return repr_string(self, PotentialPath.times, PotentialPath.first_shock)

def hj_evolve(f0: ScalarField, t_max: float, frame: Frame, dt: float, times: Optional[Sequence[float]] = None,
			  threads: int = 1) -> PotentialPath:
	"""
	Transports ``f0`` along characteristics. Each seed ``x`` starts with :math:`p = df_0(x)` and carries the value
	:math:`f_0(x) + S(x, t)` with :math:`\\dot S = p \\cdot \\dot q - H = H`, which equals :math:`f_0(x) + t H_0(x)`
	up to integration error since :math:`H` is conserved. Values are reconstructed on the grid with the pullback
	kernel (see :py:func:`.pullback_values`). Once particles cross, the snapshot is flagged and its values are not
	to be trusted.

	:param f0: the initial potential
	:param t_max: the final time
	:param frame: the horizontal frame
	:param dt: the nominal RK4 step
	:param times: the sample times in ``[0, t_max]``, defaults to five evenly spaced ones
	:param threads: the number of particle chunks integrated concurrently
	"""
	grid = require_same_grid(f0, frame.grid)
	times = np.linspace(0, t_max, 5) if times is None else np.asarray(sorted(times), dtype=np.float64)
	if times[0] != 0:
		times = np.concatenate([[0.0], times])

	seeds = grid.points()
	q = seeds.copy()
	p = grad(f0).components.reshape((grid.ndim, -1)).T
	h0 = hamiltonian(frame, q, p)
	action = np.zeros(grid.size)
	values0 = f0.values.ravel()

	fields, shocks, residuals = [f0], [False], [0.0]
	for t_prev, t in zip(times[:-1], times[1:]):
		q, p, action = integrate_particles(frame, q, p, t - t_prev, dt, action, threads)
		displacement = grid.minimal_image(q - seeds).T.reshape((grid.ndim, *grid.dims))
		log_jacobian, shock = lattice_log_jacobian(grid, displacement)
		flow = FlowMap(grid, q, log_jacobian, t, shock=shock)
		fields.append(ScalarField(grid, pullback_values(flow, values0 + action, strict=not shock)))
		shocks.append(shock)
		residuals.append(float(np.max(np.abs(action - t * h0))))
		if shock:
			logger.warning("Characteristics crossed by t=%g, later potentials are unreliable", t)
	return PotentialPath(times, fields, shocks, residuals)

def hj_residual(path: PotentialPath, frame: Frame, at: Optional[Sequence[float]] = None) -> float:
	"""
	:param path: the sampled potentials
	:param frame: the horizontal frame
	:param at: the times to evaluate at, each matched to the nearest interior sample; every interior sample by default
	:return: the largest :math:`L^2` norm of :math:`\\partial_t f + H^\\tau(df)` over the chosen interior samples, with
		central differences in time and the central stencil in space
	:raise StructuralError: if the path has fewer than 3 samples
	"""
	if len(path) < 3:
		raise StructuralError("A residual in time needs at least 3 samples", path)
	interior = np.asarray(path.times[1:-1])
	if at is None:
		indices = range(1, len(path) - 1)
	else:
		indices = sorted({1 + int(np.argmin(np.abs(interior - t))) for t in at})
	worst = 0.0
	for j in indices:
		f = path.fields[j]
		rate = (path.fields[j + 1].values - path.fields[j - 1].values) / (path.times[j + 1] - path.times[j - 1])
		energy = 0.5 * np.sum(horizontal_coefficients(f, frame) ** 2, axis=0)
		worst = max(worst, norm(ScalarField(f.grid, rate + energy), "l2"))
	return worst

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ RESIDUALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def monge_ampere_residual(flow: FlowMap, g: ScalarField, h: ScalarField, order: int = 1) -> ScalarField:
	"""
	The Monge–Ampère residual :math:`h(\\phi(x)) \\det D\\phi(x) - g(x)` per seed node ``x``, which vanishes exactly
	when :math:`\\phi` pushes :math:`g \\mu` to :math:`h \\mu`. The target is read off the grid with a periodic spline of
	the given order, linear by default.

	:raise StructuralError: if the arguments live on different grids
	"""
	grid = require_same_grid(flow.grid, g, h)
	target = sample(h, flow.positions, order)
	return ScalarField(grid, target.reshape(grid.dims) * flow.jacobian() - g.values)

def is_flat_frame(frame: Frame) -> bool:
	""" :return: whether ``frame`` is the coordinate frame of the full tangent space """
	n = frame.grid.ndim
	identity = np.eye(n).reshape((n, n) + (1,) * n)
	return frame.rank == n and np.array_equal(frame.coefficients, np.broadcast_to(identity, frame.coefficients.shape))

def burgers_residual(flow_path: Sequence[Tuple[float, FlowMap]], frame: Frame) -> float:
	"""
	For the flat full-rank frame, the particle velocities of a horizontal exponential solve the inviscid Burgers
	equation :math:`\\partial_t V + (V \\cdot \\nabla) V = 0`. The velocities are pulled back onto the grid at every
	sample, and the residual uses central differences in time and the central stencil in space.

	:param flow_path: ``(t, flow)`` pairs with particle velocities, at least 3 of them
	:param frame: the frame the flows were computed with, which must be the flat frame

	:return: the largest :math:`L^2` residual norm over the interior samples

	:raise StructuralError: if the frame is not flat, fewer than 3 samples are given, a flow carries no velocities,
		or a flow is flagged as shocked
	"""
	if not is_flat_frame(frame):
		raise StructuralError("The Burgers residual is only defined for the flat full-rank frame", frame)
	if len(flow_path) < 3:
		raise StructuralError("A residual in time needs at least 3 samples", flow_path)
	for t, flow in flow_path:
		if flow.shock:
			raise StructuralError(f"Flow at t={t} is flagged as shocked", flow)
		if flow.velocities is None:
			raise StructuralError(f"Flow at t={t} carries no particle velocities", flow)

	grid = frame.grid
	fields = [pullback_values(flow, flow.velocities.T) for _, flow in flow_path]
	worst = 0.0
	for j in range(1, len(flow_path) - 1):
		rate = (fields[j + 1] - fields[j - 1]) / (flow_path[j + 1][0] - flow_path[j - 1][0])
		V = fields[j]
		transport = np.stack([sum(V[b] * difference(V[a], b, grid.spacing[b]) for b in range(grid.ndim))
							  for a in range(grid.ndim)])
		residual = np.sqrt(np.sum((rate + transport) ** 2, axis=0))
		worst = max(worst, norm(residual, "l2", grid=grid))
	return worst
