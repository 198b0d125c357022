"""
:Date: 14.10.2026

.. versionadded:: v0.1.0

Experiment configuration, dispatch and reporting. A configuration is a JSON object with the sections documented in
:py:data:`DEFAULTS`; every key is checked, so that a misspelled key is an error instead of a silently ignored
setting. :py:func:`run_experiment` executes one pipeline and writes into its output directory ::

	config.json     the resolved configuration, defaults filled in
	report.json     metrics, tolerance checks, diagnostics and wall-clock timings
	report.tex      the summary table as a standalone LaTeX document
	*.csv           plot-ready tables, one row per node or sample
	*.srfld         binary field files, see :py:mod:`SubRosa.FieldIO`
	*.srflw         binary flow files

A tolerance is either a number, read as an upper bound, or an object ``{"max": bound}`` or ``{"min": bound}``.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import copy
import json
import logging
import math
import os
import time
from contextlib import contextmanager
from os import PathLike
from typing import Any, Dict, Final, List, Mapping, Optional, Sequence, Tuple, Union, Callable, Iterator, Literal, \
	final

import numpy as np
from SEPModules.SEPPrinting import repr_string

from SubRosa.Distribution import Frame, check_bracket_generating, horizontal_coefficients, horizontal_field, \
	random_horizontal_coefficients
from SubRosa.Expression import expression_eval
from SubRosa.FieldIO import write_field, write_flow, write_field_csv, write_table, write_residual_history, \
	read_scalar_field
from SubRosa.FlowBase import KERNELS, pushforward_density
from SubRosa.Geodesics import exp_tau, characteristic_flow, displacement_interpolation, integrate_particles, \
	hj_evolve, hj_residual, burgers_residual, is_flat_frame
from SubRosa.GridBase import Grid, ScalarField, Density, ConfigError, StructuralError, PositivityError, \
	divergence, integrate, grad, norm
from SubRosa.HeatEntropy import heat_evolve, gradient_flow_check, path_action, metric_coercivity
from SubRosa.Moser import moser_flow
from SubRosa.Subelliptic import hodge_decompose
from SubRosa.TeXReport import ReportDocument

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

Path: Final = Union[str, PathLike]

KINDS: Final[Tuple[str, ...]] = ("moser", "geodesic", "interp", "heat", "hodge", "growth")
""" The experiment kinds :py:func:`run_experiment` dispatches on. """

DEFAULTS: Final[Dict[str, Any]] = {
		"kind":       None,
		"grid":       {"dims": [16, 16, 16], "period": None},
		"frame":      "sin-heisenberg",
		"density":    {"initial": "1", "target": "1", "normalize": False},
		"potential":  "0",
		"numerics":   {
				"steps":          16,
				"dt":             0.01,
				"tol":            1e-8,
				"t_max":          1.0,
				"times":          None,
				"kernel":         "scatter",
				"stage_solves":   False,
				"stepper":        "cn",
				"preconditioned": False,
				"max_depth":      3,
				},
		"geodesic":   {"q0": None, "p0": None},
		"points":     None,
		"tolerances": {},
		"output":     "subrosa-out",
		"dump_flow":  False,
		"seed":       0,
		}
"""
Every configuration key with its default.

* ``grid``: node counts per axis and optional periods (default 1 per axis)
* ``frame``: a builtin frame name or ``{"vectors": [[expr, ...], ...], "name": label}``
* ``density``: the initial and target ratios as expression strings, numbers or ``{"file": path}``; ``normalize``
  rescales both to mass 1
* ``potential``: the potential of ``interp`` experiments, as a density entry
* ``numerics``: substeps of the Moser flow, time step, solver tolerance, final time, sample times, reconstruction
  kernel, per-stage solves, heat stepper, Jacobi preconditioning and bracket depth
* ``geodesic``: start point and covector, defaulting to ``(0.1, 0.2, 0.3)`` and ``(0.3, -0.2, 0.5)`` cut to the grid
* ``points``: the points at which ``growth`` experiments evaluate the growth vector, all nodes by default
* ``tolerances``: declared bounds per metric name
* ``dump_flow``: whether ``moser`` experiments write the flow map as ``flow.srflw``
* ``seed``: the seed of the random test fields of ``hodge`` experiments
"""

_SECTIONS: Final[Tuple[str, ...]] = ("grid", "density", "numerics", "geodesic")

METRICS: Final[Dict[str, Tuple[str, ...]]] = {
		"moser":    ("l1_error", "l2_error", "linf_error", "renormalization", "monge_ampere",
					 "horizontality_residual", "action", "iterations"),
		"geodesic": ("energy_drift", "halving_ratio", "endpoint_step", "straight_line_error"),
		"interp":   ("t0_error", "mass_drift", "hj_residual", "characteristic_residual", "shock",
					 "single_particle_mismatch", "burgers_residual"),
		"heat":     ("max_gap", "max_identity_residual", "max_mass_drift", "final_entropy", "monotone",
					 "entropy_production", "path_action", "coercivity"),
		"hodge":    ("divergence_ratio", "orthogonality", "residual", "iterations", "kernel_defect"),
		"growth":   ("bracket_generating", "max_depth_needed", "min_rank"),
		}
""" The metric names each experiment kind may report. """

ORDER_METRICS: Final[Dict[str, Tuple[str, ...]]] = {
		"moser":    ("l1_error", "l2_error", "linf_error", "monge_ampere"),
		"geodesic": ("energy_drift", "endpoint_step"),
		"interp":   ("hj_residual", "burgers_residual"),
		"heat":     ("max_gap",),
		"hodge":    (),
		"growth":   (),
		}
""" Per kind, the error metrics a refinement study fits an order of convergence to, reported as ``order_<name>``. """

Bound: Final = Tuple[Literal["max", "min"], float]

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ VALIDATION ~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _require(condition: bool, key: str, message: str, value: Any = None) -> None:
	if not condition:
		raise ConfigError(f"Invalid value for {key!r}: {message}", value)

def _is_number(value: Any) -> bool:
	return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)

def _is_integer(value: Any) -> bool:
	return isinstance(value, int) and not isinstance(value, bool)

def _merge(document: Mapping[str, Any]) -> Dict[str, Any]:
	""" :return: the defaults overridden by ``document``, rejecting unknown keys at the top level and in sections """
	settings = copy.deepcopy(DEFAULTS)
	for key, value in document.items():
		if key not in DEFAULTS:
			raise ConfigError(f"Unknown key {key!r}, choose from: {', '.join(DEFAULTS)}", key)
		if key in _SECTIONS:
			_require(isinstance(value, dict), key, "expected an object", value)
			for sub, sub_value in value.items():
				if sub not in DEFAULTS[key]:
					raise ConfigError(f"Unknown key {f'{key}.{sub}'!r}, choose from: {', '.join(DEFAULTS[key])}", sub)
				settings[key][sub] = copy.deepcopy(sub_value)
		else:
			settings[key] = copy.deepcopy(value)
	return settings

def _normalize_bound(name: str, value: Any) -> Dict[str, float]:
	key = f"tolerances.{name}"
	if _is_number(value):
		return {"max": float(value)}
	_require(isinstance(value, dict) and len(value) == 1 and next(iter(value)) in ("max", "min")
			 and _is_number(next(iter(value.values()))), key, "expected a number, {\"max\": x} or {\"min\": x}", value)
	side, bound = next(iter(value.items()))
	return {side: float(bound)}

def _validate(settings: Dict[str, Any]) -> None:
	""" Checks every value and fills in the defaults that depend on other values, in place. """
	kind = settings["kind"]
	if kind not in KINDS:
		raise ConfigError(f"Experiment kind {kind!r} is not known, choose from: {', '.join(KINDS)}", kind)

	dims = settings["grid"]["dims"]
	_require(isinstance(dims, list) and len(dims) in (2, 3) and all(_is_integer(d) and d >= 4 for d in dims),
			 "grid.dims", "expected 2 or 3 integers of at least 4", dims)
	period = settings["grid"]["period"]
	_require(period is None or (isinstance(period, list) and len(period) == len(dims)
								and all(_is_number(p) and p > 0 for p in period)),
			 "grid.period", "expected one positive number per axis", period)
	n = len(dims)

	frame = settings["frame"]
	if isinstance(frame, dict):
		unknown = [k for k in frame if k not in ("vectors", "name")]
		if unknown:
			raise ConfigError(f"Unknown key {f'frame.{unknown[0]}'!r}, choose from: vectors, name", unknown[0])
		_require(isinstance(frame.get("vectors"), list), "frame.vectors", "expected a list of vectors", frame)
	else:
		_require(isinstance(frame, str), "frame", "expected a builtin name or an object with 'vectors'", frame)

	for key in ("initial", "target"):
		_check_source(settings["density"][key], f"density.{key}")
	_require(isinstance(settings["density"]["normalize"], bool), "density.normalize", "expected a boolean")
	_check_source(settings["potential"], "potential")

	numerics = settings["numerics"]
	_require(_is_integer(numerics["steps"]) and numerics["steps"] >= 1, "numerics.steps",
			 "expected a positive integer", numerics["steps"])
	_require(_is_number(numerics["dt"]) and numerics["dt"] > 0, "numerics.dt", "expected a positive number",
			 numerics["dt"])
	_require(_is_number(numerics["tol"]) and 0 < numerics["tol"] <= 1e-4, "numerics.tol",
			 "expected a number in (0, 1e-4]", numerics["tol"])
	_require(_is_number(numerics["t_max"]) and numerics["t_max"] >= 0, "numerics.t_max",
			 "expected a non-negative number", numerics["t_max"])
	times = numerics["times"]
	_require(times is None or (isinstance(times, list) and len(times) >= 2
							   and all(_is_number(t) and 0 <= t <= max(numerics["t_max"], 1.0) for t in times)),
			 "numerics.times", "expected at least 2 times within the integration interval", times)
	_require(numerics["kernel"] in KERNELS, "numerics.kernel", f"choose from: {', '.join(KERNELS)}",
			 numerics["kernel"])
	_require(numerics["stepper"] in ("cn", "rk4"), "numerics.stepper", "choose from: cn, and rk4",
			 numerics["stepper"])
	for key in ("stage_solves", "preconditioned"):
		_require(isinstance(numerics[key], bool), f"numerics.{key}", "expected a boolean", numerics[key])
	_require(_is_integer(numerics["max_depth"]) and numerics["max_depth"] >= 1, "numerics.max_depth",
			 "expected a positive integer", numerics["max_depth"])

	geodesic = settings["geodesic"]
	for key, default in (("q0", [0.1, 0.2, 0.3]), ("p0", [0.3, -0.2, 0.5])):
		if geodesic[key] is None:
			geodesic[key] = default[:n]
		_require(isinstance(geodesic[key], list) and len(geodesic[key]) == n
				 and all(_is_number(v) for v in geodesic[key]),
				 f"geodesic.{key}", f"expected {n} numbers", geodesic[key])

	points = settings["points"]
	_require(points is None or (isinstance(points, list) and len(points) > 0
								and all(isinstance(p, list) and len(p) == n and all(_is_number(v) for v in p)
										for p in points)),
			 "points", f"expected a list of points with {n} coordinates", points)

	tolerances = settings["tolerances"]
	_require(isinstance(tolerances, dict), "tolerances", "expected an object", tolerances)
	known = METRICS[kind] + tuple(f"order_{m}" for m in ORDER_METRICS[kind])
	for name in tolerances:
		if name not in known:
			raise ConfigError(f"Unknown key {f'tolerances.{name}'!r}, the {kind} experiment reports: "
							  f"{', '.join(known)}", name)
	settings["tolerances"] = {name: _normalize_bound(name, value) for name, value in tolerances.items()}

	_require(isinstance(settings["output"], str) and settings["output"] != "", "output", "expected a path",
			 settings["output"])
	_require(isinstance(settings["dump_flow"], bool), "dump_flow", "expected a boolean", settings["dump_flow"])
	_require(_is_integer(settings["seed"]) and settings["seed"] >= 0, "seed", "expected a non-negative integer",
			 settings["seed"])

def _check_source(value: Any, key: str) -> None:
	if isinstance(value, str) or _is_number(value):
		return
	_require(isinstance(value, dict) and set(value) == {"file"} and isinstance(value["file"], str), key,
			 "expected an expression, a number or {\"file\": path}", value)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ CONFIGURATION ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class ExperimentConfig:
	"""
	A validated experiment configuration. Construction samples every expression and reads every referenced field
	file, so that all input problems surface before any computation starts. Instances are immutable.

	:param settings: the complete settings, as produced by :py:func:`parse_config`
	:param base_dir: the directory relative file references are resolved against

	:raise ConfigError: if a value fails validation, a referenced file is missing or does not match the grid, or a
		density is not positive
	:raise ExpressionError: if an expression fails to parse, with the position of the problem
	:raise DegenerateFrameError: if the configured frame is degenerate
	"""

	def __init__(self, settings: Mapping[str, Any], base_dir: Path = "."):
		settings = copy.deepcopy(dict(settings))
		_validate(settings)
		self._settings = settings
		self._base_dir = os.fspath(base_dir)

		grid = settings["grid"]
		self._grid = Grid(grid["dims"], grid["period"])
		self._frame = self._build_frame(settings["frame"])
		self._initial = self._density("initial")
		self._target = self._density("target")
		self._potential = self._scalar(settings["potential"], "potential")

	def _build_frame(self, entry: Union[str, Dict[str, Any]]) -> Frame:
		if isinstance(entry, str):
			try:
				return Frame.builtin(entry, self._grid)
			except (NotImplementedError, StructuralError) as e:
				raise ConfigError(f"Invalid value for 'frame': {e}", entry) from e
		try:
			return Frame(self._grid, entry["vectors"], entry.get("name", "custom"))
		except StructuralError as e:
			raise ConfigError(f"Invalid value for 'frame.vectors': {e.msg}", entry) from e

	def _scalar(self, entry: Union[str, float, Dict[str, str]], key: str) -> ScalarField:
		if isinstance(entry, str):
			return expression_eval(entry, self._grid)
		if not isinstance(entry, dict):
			return ScalarField(self._grid, float(entry))
		path = os.path.join(self._base_dir, entry["file"])
		if not os.path.isfile(path):
			raise ConfigError(f"File {entry['file']!r} referenced by {key!r} does not exist", path)
		try:
			return read_scalar_field(path, self._grid)
		except (StructuralError, OSError) as e:
			raise ConfigError(f"File {entry['file']!r} referenced by {key!r} is not usable: {e}", path) from e

	def _density(self, which: str) -> Density:
		key = f"density.{which}"
		field = self._scalar(self._settings["density"][which], key)
		try:
			return Density(self._grid, field.values, normalize=self._settings["density"]["normalize"])
		except PositivityError as e:
			raise ConfigError(f"Invalid value for {key!r}: {e.msg}", field) from e

	@property
	def settings(self) -> Dict[str, Any]:
		""" :return: a copy of the resolved settings """
		return copy.deepcopy(self._settings)

	@property
	def kind(self) -> str:
		return self._settings["kind"]

	@property
	def base_dir(self) -> str:
		return self._base_dir

	@property
	def grid(self) -> Grid:
		return self._grid

	@property
	def frame(self) -> Frame:
		return self._frame

	@property
	def initial(self) -> Density:
		return self._initial

	@property
	def target(self) -> Density:
		return self._target

	@property
	def potential(self) -> ScalarField:
		return self._potential

	@property
	def numerics(self) -> Dict[str, Any]:
		return copy.deepcopy(self._settings["numerics"])

	@property
	def q0(self) -> Tuple[float, ...]:
		return tuple(self._settings["geodesic"]["q0"])

	@property
	def p0(self) -> Tuple[float, ...]:
		return tuple(self._settings["geodesic"]["p0"])

	@property
	def points(self) -> Optional[np.ndarray]:
		points = self._settings["points"]
		return None if points is None else np.asarray(points, dtype=np.float64)

	@property
	def tolerances(self) -> Dict[str, Bound]:
		""" :return: per metric name, the side of the bound and the bound """
		return {name: next(iter(bound.items())) for name, bound in self._settings["tolerances"].items()}

	@property
	def output(self) -> str:
		return self._settings["output"]

	@property
	def dump_flow(self) -> bool:
		return self._settings["dump_flow"]

	@property
	def seed(self) -> int:
		return self._settings["seed"]

	def refined(self, factor: int) -> ExperimentConfig:
		"""
		:return: the configuration with ``factor`` times the nodes per axis and substeps and a ``factor`` times
			smaller time step
		:raise ConfigError: if an input is read from a file, which cannot follow the grid
		"""
		settings = self.settings
		if any(isinstance(s, dict) for s in (settings["density"]["initial"], settings["density"]["target"],
											 settings["potential"])):
			raise ConfigError("Inputs read from field files cannot be refined", self)
		settings["grid"]["dims"] = [factor * d for d in settings["grid"]["dims"]]
		settings["numerics"]["steps"] *= factor
		settings["numerics"]["dt"] /= factor
		return ExperimentConfig(settings, self._base_dir)

	def to_json(self) -> str:
		return json.dumps(self._settings, indent=2, sort_keys=True)

	def __repr__(self) -> str:
		return repr_string(self, ExperimentConfig.kind, ExperimentConfig.grid, ExperimentConfig.frame)

def _overlay(document: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
	""" :return: ``document`` with ``overrides`` applied, section by section for the sectioned keys """
	document = copy.deepcopy(document)
	for key, value in overrides.items():
		if key in _SECTIONS and isinstance(value, dict) and isinstance(document.get(key), dict):
			document[key].update(copy.deepcopy(value))
		else:
			document[key] = copy.deepcopy(value)
	return document

def parse_config(text: str, kind: Optional[str] = None, base_dir: Path = ".",
				 overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
	"""
	Parses a JSON configuration document.

	:param text: the document
	:param kind: the experiment kind requested on the command line, filled in when the document has none
	:param base_dir: the directory relative file references are resolved against
	:param overrides: settings that replace those of the document before validation, in the same nested layout, such
		as ``{"numerics": {"steps": 8}}``

	:raise ConfigError: on malformed JSON (with line and column), unknown keys (naming the key), invalid values, or a
		``kind`` that contradicts the document
	:raise ExpressionError: if an expression fails to parse
	"""
	try:
		document = json.loads(text)
	except json.JSONDecodeError as e:
		raise ConfigError(f"Malformed configuration at line {e.lineno}, column {e.colno}: {e.msg}", "config") from e
	if not isinstance(document, dict):
		raise ConfigError("A configuration must be a JSON object", type(document).__name__)
	if overrides:
		document = _overlay(document, overrides)
	if kind is not None:
		if document.get("kind", kind) != kind:
			raise ConfigError(f"Configuration declares kind {document['kind']!r}, but {kind!r} was requested", kind)
		document["kind"] = kind
	return ExperimentConfig(_merge(document), base_dir)

def load_config(path: Path, kind: Optional[str] = None,
				overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
	""" Reads and parses the configuration file at ``path``, resolving file references relative to it. """
	try:
		with open(path, "r", encoding="utf-8") as stream:
			text = stream.read()
	except OSError as e:
		raise ConfigError(f"Cannot read configuration: {e}", os.fspath(path)) from e
	return parse_config(text, kind, os.path.dirname(os.path.abspath(path)), overrides)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ REPORT ~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def within(value: float, bound: Bound) -> bool:
	""" :return: whether ``value`` satisfies ``bound``; NaN never does """
	side, limit = bound
	return bool(value <= limit) if side == "max" else bool(value >= limit)

def _plain(value: Any) -> Any:
	""" Converts numpy scalars and arrays to JSON values, non-finite floats to ``None``. """
	if isinstance(value, dict):
		return {str(k): _plain(v) for k, v in value.items()}
	if isinstance(value, (list, tuple)):
		return [_plain(v) for v in value]
	if isinstance(value, np.ndarray):
		return _plain(value.tolist())
	if isinstance(value, (np.integer, np.bool_)):
		return value.item()
	if isinstance(value, (float, np.floating)):
		return float(value) if math.isfinite(value) else None
	return value

@final
class ExperimentReport:
	"""
	The outcome of one experiment. Every declared tolerance whose metric was measured is checked; one that was not
	measured is listed under :py:attr:`unchecked` and does not affect :py:attr:`passed`.

	:param config: the configuration that was run
	:param metrics: the scalar metrics by name
	:param diagnostics: further JSON-compatible details
	:param timings: wall-clock seconds per stage
	"""

	def __init__(self, config: ExperimentConfig, metrics: Mapping[str, float],
				 diagnostics: Optional[Mapping[str, Any]] = None, timings: Optional[Mapping[str, float]] = None):
		self._config = config
		self._metrics = {name: float(value) for name, value in metrics.items()}
		self._diagnostics = dict() if diagnostics is None else dict(diagnostics)
		self._timings = dict() if timings is None else dict(timings)
		self._checks: Dict[str, Tuple[str, float, bool]] = dict()
		self._unchecked: List[str] = list()
		for name, bound in config.tolerances.items():
			if name in self._metrics:
				self._checks[name] = (*bound, within(self._metrics[name], bound))
			else:
				self._unchecked.append(name)

	@property
	def config(self) -> ExperimentConfig:
		return self._config

	@property
	def kind(self) -> str:
		return self._config.kind

	@property
	def metrics(self) -> Dict[str, float]:
		return dict(self._metrics)

	@property
	def diagnostics(self) -> Dict[str, Any]:
		return dict(self._diagnostics)

	@property
	def timings(self) -> Dict[str, float]:
		return dict(self._timings)

	@property
	def checks(self) -> Dict[str, Tuple[str, float, bool]]:
		""" :return: per checked metric, the side of the bound, the bound and whether it holds """
		return dict(self._checks)

	@property
	def unchecked(self) -> Tuple[str, ...]:
		return tuple(self._unchecked)

	@property
	def failures(self) -> Tuple[str, ...]:
		return tuple(name for name, (_, _, passed) in self._checks.items() if not passed)

	@property
	def passed(self) -> bool:
		return not self.failures

	def summary(self) -> Dict[str, Any]:
		""" :return: the JSON document written as ``report.json`` """
		return _plain({
				"kind":        self.kind,
				"passed":      self.passed,
				"metrics":     self._metrics,
				"checks":      {name: {"side": side, "bound": bound, "passed": passed}
								for name, (side, bound, passed) in self._checks.items()},
				"unchecked":   self._unchecked,
				"diagnostics": self._diagnostics,
				"timings":     self._timings,
				"config":      self._config.settings,
				})

	def write(self, out_dir: Path) -> None:
		""" Writes ``report.json`` and ``report.tex`` into ``out_dir``. """
		out_dir = os.fspath(out_dir)
		with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as stream:
			json.dump(self.summary(), stream, indent=2, sort_keys=True)
		with ReportDocument(os.path.join(out_dir, "report.tex"), f"SubRosa {self.kind} experiment") as doc:
			doc.paragraph(f"Grid {' x '.join(map(str, self._config.grid.dims))}, frame {self._config.frame.name}, "
						  f"verdict: {'pass' if self.passed else 'fail'}.")
			doc.metrics_table(self._metrics, self._checks)
			if self._timings:
				doc.table(("stage", "seconds"), [(name, float(t)) for name, t in self._timings.items()])
		logger.info("Report written to %s", out_dir)

	def export(self, prefix: Path) -> None:
		""" Writes the summary as ``<prefix>.json`` and the metrics as a one-row table ``<prefix>.csv``. """
		prefix = os.fspath(prefix)
		directory = os.path.dirname(prefix)
		if directory:
			os.makedirs(directory, exist_ok=True)
		with open(f"{prefix}.json", "w", encoding="utf-8") as stream:
			json.dump(self.summary(), stream, indent=2, sort_keys=True)
		write_table(f"{prefix}.csv", tuple(self._metrics), [tuple(self._metrics.values())])

	def __repr__(self) -> str:
		return repr_string(self, ExperimentReport.kind, ExperimentReport.passed, ExperimentReport.failures)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ RUNNERS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class _Stopwatch:
	""" Collects wall-clock timings per named stage. """

	def __init__(self):
		self.timings: Dict[str, float] = dict()

	@contextmanager
	def stage(self, name: str) -> Iterator[None]:
		start = time.perf_counter()
		yield
		self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start

Outcome: Final = Tuple[Dict[str, float], Dict[str, Any]]
Runner: Final = Callable[[ExperimentConfig, str, int, _Stopwatch], Outcome]

def _run_moser(cfg: ExperimentConfig, out: str, threads: int, clock: _Stopwatch) -> Outcome:
	numerics = cfg.numerics
	with clock.stage("transport"):
		flow, transport = moser_flow(cfg.initial, cfg.target, cfg.frame, numerics["steps"], numerics["tol"],
									 stage_solves=numerics["stage_solves"], checkpoints=numerics["times"] or (),
									 kernel=numerics["kernel"], preconditioned=numerics["preconditioned"],
									 threads=threads)
	with clock.stage("output"):
		pushed = pushforward_density(flow, cfg.initial, numerics["kernel"])
		if cfg.dump_flow:
			write_flow(os.path.join(out, "flow.srflw"), flow)
		write_field(os.path.join(out, "pushforward.srfld"), pushed.field)
		write_field_csv(os.path.join(out, "densities.csv"), {"initial":     cfg.initial.field,
															 "target":      cfg.target.field,
															 "pushforward": pushed.field})
		write_table(os.path.join(out, "solves.csv"), ("t", "iterations", "residual", "kernel_defect"),
					transport.solves)
		if transport.checkpoints:
			write_table(os.path.join(out, "checkpoints.csv"), ("t", "l1_error", "l2_error", "linf_error"),
						transport.checkpoints)
	diagnostics = {
			"solves":      len(transport.solves),
			"kernel":      transport.kernel,
			"checkpoints": transport.checkpoints,
			}
	return transport.metrics(), diagnostics

def _run_geodesic(cfg: ExperimentConfig, out: str, threads: int, clock: _Stopwatch) -> Outcome:
	numerics, grid, frame = cfg.numerics, cfg.grid, cfg.frame
	with clock.stage("integration"):
		trajectory = exp_tau(cfg.q0, cfg.p0, numerics["t_max"], frame, numerics["dt"])
		half = exp_tau(cfg.q0, cfg.p0, numerics["t_max"], frame, numerics["dt"] / 2).endpoint.q
		quarter = exp_tau(cfg.q0, cfg.p0, numerics["t_max"], frame, numerics["dt"] / 4).endpoint.q
	coarse = float(np.max(np.abs(grid.minimal_image(trajectory.endpoint.q - half))))
	fine = float(np.max(np.abs(grid.minimal_image(half - quarter))))
	metrics = {
			"energy_drift":  trajectory.energy_drift,
			"halving_ratio": coarse / fine if fine > 0 else float("nan"),
			"endpoint_step": coarse,
			}
	if is_flat_frame(frame):
		straight = grid.wrap(np.asarray(cfg.q0) + np.outer(trajectory.times, cfg.p0))
		metrics["straight_line_error"] = float(np.max(np.abs(grid.minimal_image(trajectory.q - straight))))

	with clock.stage("output"):
		header = ("t", *(f"q_{a}" for a in grid.axis_names), *(f"p_{a}" for a in grid.axis_names), "H")
		rows = np.column_stack([trajectory.times, trajectory.q, trajectory.p, trajectory.hamiltonian_values])
		write_table(os.path.join(out, "trajectory.csv"), header, rows)
	diagnostics = {"endpoint_q": trajectory.endpoint.q, "endpoint_p": trajectory.endpoint.p, "steps": len(trajectory) - 1}
	return metrics, diagnostics

def _run_interp(cfg: ExperimentConfig, out: str, threads: int, clock: _Stopwatch) -> Outcome:
	numerics, grid, frame = cfg.numerics, cfg.grid, cfg.frame
	nu, f = cfg.initial, cfg.potential
	t_max, dt, kernel = numerics["t_max"], numerics["dt"], numerics["kernel"]
	with clock.stage("interpolation"):
		start = displacement_interpolation(nu, f, 0.0, frame, dt, kernel, threads)
		momenta = grad(f).components.reshape((grid.ndim, -1)).T
		flow, _ = characteristic_flow(grid, momenta, t_max, frame, dt, threads)
		end = pushforward_density(flow, nu, kernel)
		single, _, _ = integrate_particles(frame, grid.points()[:1], momenta[:1], t_max, dt)
	with clock.stage("hamilton-jacobi"):
		if numerics["times"] is None:
			# sampled at every step, the residual is read at fixed times
			times = np.linspace(0.0, t_max, max(2, int(round(t_max / dt))) + 1)
			path = hj_evolve(f, t_max, frame, dt, times, threads)
			residual = hj_residual(path, frame, at=(0.25 * t_max, 0.5 * t_max, 0.75 * t_max))
		else:
			path = hj_evolve(f, t_max, frame, dt, numerics["times"], threads)
			residual = hj_residual(path, frame)
	shock = flow.shock or any(path.shock_flags)
	metrics = {
			"t0_error":                 float(np.max(np.abs(start.ratio - nu.ratio))),
			"mass_drift":               abs(end.mass - nu.mass),
			"hj_residual":              residual,
			"characteristic_residual":  max(path.transport_residual),
			"shock":                    float(shock),
			"single_particle_mismatch": float(np.max(np.abs(grid.wrap(single)[0] - flow.positions[0]))),
			}
	if is_flat_frame(frame) and not shock:
		with clock.stage("burgers"):
			flows = [(t, characteristic_flow(grid, momenta, t, frame, dt, threads)[0]) for t in path.times]
			metrics["burgers_residual"] = burgers_residual(flows, frame)

	with clock.stage("output"):
		write_field(os.path.join(out, "interpolated.srfld"), end.field)
		write_field_csv(os.path.join(out, "densities.csv"), {"initial": nu.field, "interpolated": end.field,
															 "potential": f})
		for j, potential in enumerate(path.fields):
			write_field(os.path.join(out, f"potential_{j}.srfld"), potential)
		write_table(os.path.join(out, "hamilton_jacobi.csv"), ("t", "shock", "characteristic_residual"),
					[(t, float(s), r) for t, s, r in zip(path.times, path.shock_flags, path.transport_residual)])
	diagnostics = {"times": path.times, "first_shock": path.first_shock}
	return metrics, diagnostics

def _run_heat(cfg: ExperimentConfig, out: str, threads: int, clock: _Stopwatch) -> Outcome:
	numerics, frame = cfg.numerics, cfg.frame
	with clock.stage("evolution"):
		trajectory = heat_evolve(cfg.initial, numerics["t_max"], numerics["dt"], frame, numerics["times"],
								 numerics["stepper"])
	with clock.stage("gradient-flow"):
		report = gradient_flow_check(trajectory, frame, numerics["tol"])
		action = path_action(trajectory, frame, numerics["tol"])
	with clock.stage("coercivity"):
		coercivity = metric_coercivity(frame, cfg.initial, 1, numerics["tol"])
	metrics = report.metrics()
	metrics["entropy_production"] = report.entropies[0] - report.entropies[-1]
	metrics["path_action"] = action
	metrics["coercivity"] = coercivity

	with clock.stage("output"):
		write_table(os.path.join(out, "entropy.csv"), ("t", "entropy", "mass_drift"),
					list(zip(report.times, report.entropies, report.mass_drifts)))
		write_table(os.path.join(out, "gradient_flow.csv"),
					("t", "entropy_rate", "metric", "gap", "identity_residual"),
					list(zip(report.times[1:-1], report.entropy_rates, report.metric_values, report.gaps,
							 report.identity_residuals)))
		write_field(os.path.join(out, "final.srfld"), trajectory[-1][1].field)
		write_field_csv(os.path.join(out, "densities.csv"), {"initial": cfg.initial.field,
															 "final":   trajectory[-1][1].field})
	diagnostics = {"snapshots": len(trajectory), "stepper": numerics["stepper"], "monotone": report.monotone}
	return metrics, diagnostics

def _run_hodge(cfg: ExperimentConfig, out: str, threads: int, clock: _Stopwatch) -> Outcome:
	numerics, grid, frame, nu = cfg.numerics, cfg.grid, cfg.frame, cfg.initial
	rng = np.random.default_rng(cfg.seed)
	coefficients = random_horizontal_coefficients(frame, rng)
	W = horizontal_field(frame, coefficients)
	with clock.stage("decomposition"):
		f, U, solution = hodge_decompose(W, frame, nu, numerics["tol"], return_solution=True,
										 preconditioned=numerics["preconditioned"])
	gradient = horizontal_coefficients(f, frame)
	remainder = coefficients - gradient
	pairing = integrate(ScalarField(grid, np.sum(remainder * gradient, axis=0)), nu)
	size_u = math.sqrt(integrate(ScalarField(grid, np.sum(remainder ** 2, axis=0)), nu))
	size_f = math.sqrt(integrate(ScalarField(grid, np.sum(gradient ** 2, axis=0)), nu))
	div_w = norm(divergence(W, nu), "l2", nu)
	metrics = {
			"divergence_ratio": norm(divergence(U, nu), "l2", nu) / div_w if div_w > 0 else 0.0,
			"orthogonality":    abs(pairing) / (size_u * size_f) if size_u * size_f > 0 else 0.0,
			"residual":         solution.residual_norm,
			"iterations":       float(solution.iterations),
			"kernel_defect":    solution.kernel_defect,
			}
	with clock.stage("output"):
		write_field(os.path.join(out, "field.srfld"), W)
		write_field(os.path.join(out, "potential.srfld"), f)
		write_field(os.path.join(out, "divergence_free.srfld"), U)
		write_residual_history(os.path.join(out, "residual_history.csv"), solution.residual_history)
	return metrics, {"seed": cfg.seed}

def _run_growth(cfg: ExperimentConfig, out: str, threads: int, clock: _Stopwatch) -> Outcome:
	grid, depth = cfg.grid, cfg.numerics["max_depth"]
	with clock.stage("brackets"):
		report = check_bracket_generating(cfg.frame, depth, cfg.points)
	metrics = {
			"bracket_generating": float(report.bracket_generating),
			"max_depth_needed":   float(report.max_depth_needed),
			"min_rank":           float(report.growth[:, -1].min()),
			}
	with clock.stage("output"):
		header = (*grid.axis_names, *(f"depth_{d + 1}" for d in range(depth)))
		write_table(os.path.join(out, "growth.csv"), header, np.column_stack([report.points, report.growth]))
	counts: Dict[str, int] = dict()
	for i in range(report.points.shape[0]):
		key = str(list(report.growth_vector(i)))
		counts[key] = counts.get(key, 0) + 1
	diagnostics = {"growth_vectors": counts}
	if cfg.points is not None:
		diagnostics["points"] = {str(p.tolist()): list(report.growth_vector(i)) for i, p in enumerate(report.points)}
	return metrics, diagnostics

_RUNNERS: Final[Dict[str, Runner]] = {
		"moser":    _run_moser,
		"geodesic": _run_geodesic,
		"interp":   _run_interp,
		"heat":     _run_heat,
		"hodge":    _run_hodge,
		"growth":   _run_growth,
		}

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FUNCTIONS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def run_experiment(config: ExperimentConfig, out_dir: Optional[Path] = None, threads: int = 1,
				   deterministic: bool = False) -> ExperimentReport:
	"""
	Runs the pipeline of ``config.kind`` and writes its artifacts. Failing a declared tolerance is not an error: the
	returned report is marked as failed.

	:param config: the configuration
	:param out_dir: the output directory, defaults to the configured ``output``
	:param threads: the number of particle chunks integrated concurrently
	:param deterministic: recorded in the report; every reduction runs in a fixed order regardless of ``threads``

	:raise SubRosaError: the errors of the modules the pipeline uses, unchanged
	"""
	out = os.fspath(config.output if out_dir is None else out_dir)
	os.makedirs(out, exist_ok=True)
	with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as stream:
		stream.write(config.to_json())

	clock = _Stopwatch()
	logger.info("Running %s experiment on %r", config.kind, config.grid)
	with clock.stage("total"):
		metrics, diagnostics = _RUNNERS[config.kind](config, out, threads, clock)
	diagnostics["threads"] = threads
	diagnostics["deterministic"] = deterministic
	report = ExperimentReport(config, metrics, diagnostics, clock.timings)
	report.write(out)
	for name in report.unchecked:
		logger.warning("Tolerance for %r declared, but the metric was not measured", name)
	for name in report.failures:
		logger.warning("Tolerance failed: %s = %.3e", name, report.metrics[name])
	return report

def fit_order(spacings: Sequence[float], errors: Sequence[float]) -> float:
	"""
	The empirical order of convergence: the least-squares slope of :math:`\\log e` against :math:`\\log h`. Levels with
	a non-positive or non-finite error are skipped.

	:return: the slope, NaN if fewer than two levels remain
	"""
	h = np.asarray(spacings, dtype=np.float64)
	e = np.asarray(errors, dtype=np.float64)
	usable = np.isfinite(e) & (e > 0)
	if np.count_nonzero(usable) < 2:
		return float("nan")
	slope, _ = np.polyfit(np.log(h[usable]), np.log(e[usable]), 1)
	return float(slope)

def refinement_study(config: ExperimentConfig, levels: int, out_dir: Optional[Path] = None,
					 threads: int = 1, deterministic: bool = False) -> ExperimentReport:
	"""
	Runs ``config`` at ``levels`` resolutions, level ``m`` with ``m`` times the nodes and substeps and an ``m`` times
	smaller time step (see :py:meth:`ExperimentConfig.refined`), each into ``<out>/level_<m>``. The error metrics of
	the kind get a fitted order ``order_<name>``; the remaining metrics are those of the finest level.

	:raise ConfigError: if fewer than 2 levels are requested
	"""
	if levels < 2:
		raise ConfigError(f"A refinement study needs at least 2 levels, received {levels}", levels)
	out = os.fspath(config.output if out_dir is None else out_dir)
	os.makedirs(out, exist_ok=True)
	with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as stream:
		stream.write(config.to_json())

	clock = _Stopwatch()
	reports: List[ExperimentReport] = list()
	for factor in range(1, levels + 1):
		level = config if factor == 1 else config.refined(factor)
		with clock.stage(f"level_{factor}"):
			reports.append(run_experiment(level, os.path.join(out, f"level_{factor}"), threads, deterministic))
		logger.info("Refinement level %d of %d done", factor, levels)

	spacings = [1.0 / factor for factor in range(1, levels + 1)]
	metrics = reports[-1].metrics
	names = [name for name in ORDER_METRICS[config.kind] if all(name in r.metrics for r in reports)]
	for name in names:
		metrics[f"order_{name}"] = fit_order(spacings, [r.metrics[name] for r in reports])
	write_table(os.path.join(out, "refinement.csv"), ("factor", *names),
				[(factor, *(r.metrics[name] for name in names)) for factor, r in zip(range(1, levels + 1), reports)])

	diagnostics = {"levels": levels, "level_passed": [r.passed for r in reports], "threads": threads,
				   "deterministic": deterministic}
	report = ExperimentReport(config, metrics, diagnostics, clock.timings)
	report.write(out)
	return report
