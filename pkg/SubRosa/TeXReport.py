"""
:Date: 13.10.2026

.. versionadded:: v0.1.0

Renders experiment summaries as standalone LaTeX documents, so that a ``report.tex`` produced by a run compiles on
its own and its tables can be pasted into a paper unchanged.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import logging
import math
import os
from contextlib import contextmanager
from os import PathLike
from typing import Union, AnyStr, Tuple, List, Optional, Sequence, Mapping, Iterator, Literal, Final, final, ClassVar

from SEPModules.SEPPrinting import repr_string

from SubRosa.GridBase import SubRosaError

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

logger = logging.getLogger(__name__)

_ESCAPES: Final = {
		"\\": r"\textbackslash{}",
		"&": r"\&",
		"%": r"\%",
		"$": r"\$",
		"#": r"\#",
		"_": r"\_",
		"{": r"\{",
		"}": r"\}",
		"~": r"\textasciitilde{}",
		"^": r"\textasciicircum{}",
		}

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FUNCTIONS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def escape(text: str) -> str:
	""" :return: ``text`` with every LaTeX special character replaced by its text-mode command """
	return "".join(_ESCAPES.get(c, c) for c in str(text))

def latex_number(value: Optional[float], digits: int = 3) -> str:
	r"""
	Formats a number for a table cell: integers as they are, other values in scientific notation as
	``$m \times 10^{e}$``. ``None`` renders as an en-dash, non-finite values as ``$\infty$`` or ``NaN``.
	"""
	if value is None:
		return "--"
	if isinstance(value, bool):
		return "yes" if value else "no"
	if isinstance(value, int):
		return str(value)
	if math.isnan(value):
		return "NaN"
	if math.isinf(value):
		return r"$\infty$" if value > 0 else r"$-\infty$"
	if value == 0:
		return "$0$"
	mantissa, exponent = f"{value:.{digits}e}".split("e")
	exponent = int(exponent)
	if exponent == 0:
		return f"${mantissa}$"
	return f"${mantissa} \\times 10^{{{exponent}}}$"

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ CLASSES ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class ReportError(SubRosaError):
	""" Raised when a report document is used while closed, or cannot be written. """

@final
class LineHandler:
	"""
	Container for the lines of a document. Every line is stored with its own indentation depth, so that handlers
	can be nested into each other and keep their relative layout.

	:param indent_level: the number of tab characters placed in front of each line written to this handler
	"""

	def __init__(self, indent_level: int = 0):
		self._data: List[Tuple[int, str]] = list()
		self._indent_level = indent_level

	@property
	def data(self) -> Tuple[Tuple[int, str], ...]:
		""" :return: pairs of indentation depth and line text """
		return tuple(self._data)

	@property
	def indent_level(self) -> int:
		return self._indent_level

	def write(self, s: Union[AnyStr, LineHandler]) -> None:
		"""
		Appends ``s``. A string is split at its line breaks, a handler is appended line by line with the indentation of
		this handler added to its own.
		"""
		if isinstance(s, LineHandler):
			self._data.extend((tabs + self._indent_level, line) for tabs, line in s._data)
			return
		if isinstance(s, bytes):
			s = s.decode()
		self._data.extend((self._indent_level, line) for line in s.split("\n"))

	def newline(self) -> None:
		self.write("")

	@contextmanager
	def indented(self, begin: Optional[str] = None, end: Optional[str] = None) -> Iterator[LineHandler]:
		"""
		Yields a handler one level deeper than this one and appends its lines on exit, framed by ``begin`` and ``end``
		at this handler's own depth.
		"""
		inner = LineHandler(1)
		yield inner
		if begin is not None:
			self.write(begin)
		self.write(inner)
		if end is not None:
			self.write(end)

	def __len__(self) -> int:
		return len(self._data)

	def __str__(self) -> str:
		return "\n".join(("\t" * tabs + line) if line else "" for tabs, line in self._data)

	def __repr__(self) -> str:
		return repr_string(self, LineHandler.indent_level) + f"<{len(self)} lines>"

@final
class ReportDocument:
	r"""
	A standalone ``article`` holding the summary of one experiment. The document is written to :py:attr:`path` when
	its context manager exits without an exception. Example: ::

		with ReportDocument("out/report.tex", "moser") as doc:
			doc.paragraph("Uniform to modulated density on the sin-Heisenberg frame.")
			doc.metrics_table({"l2_error": 1.2e-4}, {"l2_error": ("max", 1e-3, True)})

	:param path: the ``.tex`` file to write, the suffix is added when missing
	:param title: the title printed at the top of the document
	:param encoding: the encoding of the written file
	"""

	PACKAGES: ClassVar[Tuple[str, ...]] = ("booktabs", "amsmath", "caption")

	TEMPLATE: ClassVar[str] = (
			"\\documentclass[a4paper, 11pt]{{article}}\n"
			"{}\n"
			"\n"
			"\\begin{{document}}\n"
			"{}\n"
			"\\end{{document}}\n"
			)

	def __init__(self, path: Union[AnyStr, PathLike], title: str, *, encoding: str = "utf-8"):
		path = os.fspath(path)
		if not path.endswith(".tex"):
			path += ".tex"
		self._path = os.path.abspath(path)
		self._title = title
		self._encoding = encoding
		self._open = False
		self._written = False

		self._preamble = LineHandler(0)
		self._body = LineHandler(1)

	@property
	def path(self) -> str:
		return self._path

	@property
	def title(self) -> str:
		return self._title

	@property
	def open(self) -> bool:
		return self._open

	@property
	def written(self) -> bool:
		""" :return: whether the document was saved successfully """
		return self._written

	def _require_open(self) -> None:
		if not self._open:
			raise ReportError("Report document must be opened with a context manager before writing", self)

	def __enter__(self) -> ReportDocument:
		if self._written:
			raise ReportError("Report document was already written", self)
		self._open = True
		for package in self.PACKAGES:
			self._preamble.write(f"\\usepackage{{{package}}}")
		self._preamble.write(f"\\title{{{escape(self._title)}}}")
		self._preamble.write(r"\date{}")
		self._body.write(r"\maketitle")
		self._body.newline()
		return self

	def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
		self._open = False
		if exc_val is None:
			try:
				os.makedirs(os.path.dirname(self._path), exist_ok=True)
				with open(self._path, "wb") as file:
					file.write(self.to_latex().encode(self._encoding))
			except (OSError, UnicodeEncodeError) as e:
				raise ReportError("Error while writing report", self) from e
			self._written = True
			logger.info("Wrote %s", self._path)
		return False

	def section(self, title: str) -> None:
		self._require_open()
		self._body.write(f"\\section*{{{escape(title)}}}")

	def paragraph(self, text: str) -> None:
		""" Writes ``text`` escaped, followed by a blank line. """
		self._require_open()
		self._body.write(escape(text))
		self._body.newline()

	def table(self, header: Sequence[str], rows: Sequence[Sequence[Union[str, float, int, None]]],
			  caption: Optional[str] = None, *, escape_cells: bool = True) -> None:
		"""
		Writes a ``booktabs`` table. Numbers are formatted through :py:func:`latex_number`, string cells are escaped
		unless ``escape_cells`` is false.

		:raise ReportError: if a row does not have as many cells as the header
		"""
		self._require_open()
		for row in rows:
			if len(row) != len(header):
				raise ReportError(f"Row {row!r} has {len(row)} cells, expected {len(header)}", self)

		def cell(value) -> str:
			if isinstance(value, str):
				return escape(value) if escape_cells else value
			return latex_number(value)

		with self._body.indented(r"\begin{table}[h]", r"\end{table}") as table:
			table.write(r"\centering")
			with table.indented(f"\\begin{{tabular}}{{l{'r' * (len(header) - 1)}}}", r"\end{tabular}") as tabular:
				tabular.write(r"\toprule")
				tabular.write(" & ".join(escape(h) for h in header) + r" \\")
				tabular.write(r"\midrule")
				for row in rows:
					tabular.write(" & ".join(cell(v) for v in row) + r" \\")
				tabular.write(r"\bottomrule")
			if caption is not None:
				table.write(f"\\caption*{{{escape(caption)}}}")
		self._body.newline()

	def metrics_table(self, metrics: Mapping[str, float],
					  checks: Optional[Mapping[str, Tuple[Literal["max", "min"], float, bool]]] = None) -> None:
		"""
		Writes one row per metric with its declared bound and verdict.

		:param metrics: the metric values by name
		:param checks: per checked metric, the side of the bound, the bound and whether it holds; metrics without a
			check get an empty bound and verdict
		"""
		checks = dict() if checks is None else checks
		rows = list()
		for name, value in metrics.items():
			if name in checks:
				side, bound, passed = checks[name]
				relation = r"$\le$ " if side == "max" else r"$\ge$ "
				rows.append((escape(name), latex_number(value), relation + latex_number(bound),
							 "pass" if passed else r"\textbf{fail}"))
			else:
				rows.append((escape(name), latex_number(value), "--", "--"))
		self.table(("metric", "value", "bound", "verdict"), rows, escape_cells=False)

	def to_latex(self) -> str:
		return self.TEMPLATE.format(str(self._preamble), str(self._body))

	def __repr__(self) -> str:
		return repr_string(self, ReportDocument.title, ReportDocument.open, ReportDocument.written)
