"""
:Date: 15.10.2026

.. versionadded:: v0.1.0

Command line entry point, installed as ``subrosa``: ::

	subrosa <kind> --config FILE [--refine N] [--deterministic] [--threads T] [--out DIR] [-v]
		[--grid N [N ...]] [--steps S] [--frame NAME] [--target EXPR|FILE] [--tol TOL] [--report PREFIX] [--dump-flow]
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Any, Dict, Optional, Sequence, Final

from SubRosa.Experiment import KINDS, load_config, run_experiment, refinement_study
from SubRosa.GridBase import SubRosaError

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger("SubRosa")

EXIT_PASS: Final[int] = 0
EXIT_TOLERANCE: Final[int] = 2

EXIT_CODES: Final[str] = """\
exit codes:
  0  every declared tolerance holds
  2  a declared tolerance failed
  3  configuration error (malformed or unknown key, bad expression, mismatched grid, degenerate frame)
  4  solver failure (nonzero-mean source, unequal masses, iteration cap reached)
  5  integration failure (non-finite particle state, loss of positivity)
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FUNCTIONS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _parser() -> argparse.ArgumentParser:
	parser = argparse.ArgumentParser(prog="subrosa",
									 description="Subriemannian Moser transport and optimal transport experiments.",
									 epilog=EXIT_CODES,
									 formatter_class=argparse.RawDescriptionHelpFormatter)
	parser.add_argument("kind", choices=KINDS, help="the experiment to run")
	parser.add_argument("--config", required=True, help="the JSON configuration file")
	parser.add_argument("--refine", type=int, default=None, metavar="N",
						help="rerun at N resolutions and fit the convergence orders")
	parser.add_argument("--deterministic", action="store_true",
						help="fixed-order reductions; recorded in the report")
	parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
						help="particle chunks integrated concurrently (default: available cores)")
	parser.add_argument("--out", default=None, metavar="DIR", help="the output directory, overrides 'output'")
	parser.add_argument("-v", "--verbose", action="store_true", help="log solver details")

	overrides = parser.add_argument_group("configuration overrides", "replace the matching settings of the file")
	overrides.add_argument("--grid", type=int, nargs="+", default=None, metavar="N", help="node counts per axis")
	overrides.add_argument("--steps", type=int, default=None, help="Moser substeps")
	overrides.add_argument("--frame", default=None, metavar="NAME", help="a builtin frame")
	overrides.add_argument("--target", default=None, metavar="EXPR|FILE",
						   help="the target density, an expression or the path of a field file")
	overrides.add_argument("--tol", type=float, default=None, help="the relative solver tolerance")
	overrides.add_argument("--report", default=None, metavar="PREFIX",
						   help="also write the summary to PREFIX.json and the metrics to PREFIX.csv")
	overrides.add_argument("--dump-flow", action="store_true", help="write the flow map as flow.srflw")
	return parser

def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
	""" :return: the configuration settings given on the command line, in the nested layout of the file """
	settings: Dict[str, Any] = dict()
	if args.grid is not None:
		settings["grid"] = {"dims": args.grid}
	if args.frame is not None:
		settings["frame"] = args.frame
	if args.target is not None:
		target = {"file": os.path.abspath(args.target)} if os.path.isfile(args.target) else args.target
		settings["density"] = {"target": target}
	numerics = {key: value for key, value in (("steps", args.steps), ("tol", args.tol)) if value is not None}
	if numerics:
		settings["numerics"] = numerics
	if args.dump_flow:
		settings["dump_flow"] = True
	return settings

def _configure_logging(verbose: bool) -> None:
	# repeated calls from one process share the handler
	if not any(isinstance(h, logging.StreamHandler) for h in logger.handlers):
		handler = logging.StreamHandler(sys.stderr)
		handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)-7s %(name)s: %(message)s"))
		logger.addHandler(handler)
	logger.setLevel(logging.DEBUG if verbose else logging.INFO)

def main(argv: Optional[Sequence[str]] = None) -> int:
	"""
	Parses the arguments, runs the experiment and maps the outcome to the exit codes listed in :py:data:`EXIT_CODES`.

	:return: the process exit code
	"""
	args = _parser().parse_args(argv)
	_configure_logging(args.verbose)
	threads = max(1, args.threads)

	try:
		config = load_config(args.config, args.kind, _overrides(args))
		if args.refine is not None:
			report = refinement_study(config, args.refine, args.out, threads, args.deterministic)
		else:
			report = run_experiment(config, args.out, threads, args.deterministic)
	except SubRosaError as e:
		logger.error("%s: %s", type(e).__name__, e)
		return e.exit_code

	if args.report is not None:
		report.export(args.report)
	for name, value in report.metrics.items():
		logger.info("%-26s %.6e", name, value)
	if not report.passed:
		logger.error("Failed tolerances: %s", ", ".join(report.failures))
		return EXIT_TOLERANCE
	return EXIT_PASS

if __name__ == "__main__":
	sys.exit(main())
