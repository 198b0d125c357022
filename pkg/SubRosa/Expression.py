"""
:Date: 03.10.2026

.. versionadded:: v0.1.0

A small arithmetic expression language for densities, potentials and frame coefficients. Expressions are parsed
into :py:mod:`sympy` trees, which provides exact derivatives (needed for Lie brackets and Hamiltonian derivatives)
and compiled :py:mod:`numpy` evaluation.

Grammar ::

	expr   := term (("+" | "-") term)*
	term   := unary (("*" | "/") unary)*
	unary  := ("+" | "-") unary | power
	power  := atom (("^" | "**") unary)?
	atom   := NUMBER | "x" | "y" | "z" | "pi" | "π" | FUNC "(" expr ")" | "(" expr ")"
	FUNC   := "sin" | "cos" | "exp"

Whether an expression is periodic on the chosen grid is the user's responsibility.
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

from __future__ import annotations

import re
from typing import List, Tuple, Optional, Final, Callable, Dict, Union, final

import numpy as np
import sympy
from SEPModules.SEPPrinting import repr_string

from SubRosa.GridBase import Grid, ScalarField, ExpressionError, AXIS_NAMES

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ GLOBALS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

SYMBOLS: Final[Tuple[sympy.Symbol, ...]] = tuple(sympy.Symbol(n, real=True) for n in AXIS_NAMES)
""" The coordinate symbols ``x``, ``y``, ``z``. """

_FUNCTIONS: Final[Dict[str, Callable]] = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}

_CONSTANTS: Final[Dict[str, sympy.Expr]] = {"pi": sympy.pi, "π": sympy.pi}

_TOKEN: Final = re.compile(r"""
	(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
	|(?P<name>[A-Za-zπ_][A-Za-z0-9_]*)
	|(?P<op>\*\*|[-+*/^()])
	|(?P<space>\s+)
	""", re.VERBOSE)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ PARSER ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _tokenize(text: str) -> List[Tuple[str, str, int]]:
	tokens = list()
	pos = 0
	while pos < len(text):
		match = _TOKEN.match(text, pos)
		if match is None:
			raise ExpressionError(f"Unexpected character {text[pos]!r}", text, pos)
		if match.lastgroup != "space":
			tokens.append((match.lastgroup, match.group(), pos))
		pos = match.end()
	tokens.append(("end", "", len(text)))
	return tokens

class _Parser:
	""" Recursive-descent parser producing a :py:mod:`sympy` expression. """

	def __init__(self, text: str):
		self._text = text
		self._tokens = _tokenize(text)
		self._index = 0

	@property
	def _current(self) -> Tuple[str, str, int]:
		return self._tokens[self._index]

	def _fail(self, what: str) -> ExpressionError:
		kind, value, pos = self._current
		found = "end of input" if kind == "end" else repr(value)
		return ExpressionError(f"Expected {what}, found {found}", self._text, pos)

	def _accept(self, *ops: str) -> Optional[str]:
		kind, value, _ = self._current
		if kind == "op" and value in ops:
			self._index += 1
			return value
		return None

	def parse(self) -> sympy.Expr:
		expr = self._expr()
		if self._current[0] != "end":
			raise self._fail("an operator or end of input")
		return expr

	def _expr(self) -> sympy.Expr:
		expr = self._term()
		while (op := self._accept("+", "-")) is not None:
			rhs = self._term()
			expr = expr + rhs if op == "+" else expr - rhs
		return expr

	def _term(self) -> sympy.Expr:
		expr = self._unary()
		while (op := self._accept("*", "/")) is not None:
			rhs = self._unary()
			expr = expr * rhs if op == "*" else expr / rhs
		return expr

	def _unary(self) -> sympy.Expr:
		if (op := self._accept("+", "-")) is not None:
			operand = self._unary()
			return -operand if op == "-" else operand
		return self._power()

	def _power(self) -> sympy.Expr:
		base = self._atom()
		if self._accept("^", "**") is not None:
			return base ** self._unary()
		return base

	def _atom(self) -> sympy.Expr:
		kind, value, pos = self._current
		if kind == "number":
			self._index += 1
			return sympy.Float(value) if any(c in value for c in ".eE") else sympy.Integer(value)
		if kind == "name":
			self._index += 1
			if value in _FUNCTIONS:
				if self._accept("(") is None:
					raise self._fail(f"'(' after {value!r}")
				argument = self._expr()
				if self._accept(")") is None:
					raise self._fail("')'")
				return _FUNCTIONS[value](argument)
			if value in _CONSTANTS:
				return _CONSTANTS[value]
			if value in AXIS_NAMES:
				return SYMBOLS[AXIS_NAMES.index(value)]
			raise ExpressionError(f"Unknown name {value!r}", self._text, pos)
		if self._accept("(") is not None:
			expr = self._expr()
			if self._accept(")") is None:
				raise self._fail("')'")
			return expr
		raise self._fail("a number, a coordinate, a function, or '('")

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ EXPRESSION ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

@final
class Expression:
	"""
	:py:class:`Expression` wraps a closed-form function of the torus coordinates. It can be evaluated on grids or at
	arbitrary points, and differentiated exactly.

	Use :py:meth:`parse` to build one from text, or :py:meth:`from_sympy` to wrap an existing :py:mod:`sympy` tree.

	:param text: the source text, used in error messages and reports
	:param tree: the parsed :py:mod:`sympy` expression
	"""

	def __init__(self, text: str, tree: sympy.Expr):
		self._text = text
		self._tree = sympy.sympify(tree)
		self._compiled: Optional[Callable] = None

	@staticmethod
	def parse(text: str) -> Expression:
		"""
		:raise ExpressionError: with the character position of the first problem
		"""
		if not isinstance(text, str):
			raise ExpressionError(f"Expressions must be strings, received {type(text).__name__}", text)
		return Expression(text, _Parser(text).parse())

	@staticmethod
	def from_sympy(tree: Union[sympy.Expr, float]) -> Expression:
		tree = sympy.sympify(tree)
		return Expression(str(tree), tree)

	@property
	def text(self) -> str:
		return self._text

	@property
	def tree(self) -> sympy.Expr:
		""" :return: the :py:mod:`sympy` expression """
		return self._tree

	@property
	def axes(self) -> Tuple[int, ...]:
		""" :return: the indices of the coordinates this expression depends on """
		return tuple(i for i, s in enumerate(SYMBOLS) if s in self._tree.free_symbols)

	@property
	def is_zero(self) -> bool:
		return self._tree == 0

	def diff(self, axis: int) -> Expression:
		""" :return: the exact partial derivative along coordinate ``axis`` """
		return Expression.from_sympy(sympy.diff(self._tree, SYMBOLS[axis]))

	def require_axes(self, ndim: int) -> None:
		""" :raise ExpressionError: if the expression uses a coordinate beyond the first ``ndim`` """
		extra = [AXIS_NAMES[a] for a in self.axes if a >= ndim]
		if extra:
			raise ExpressionError(f"Coordinate {extra[0]!r} is not available on a {ndim}-axis grid", self._text)

	def __call__(self, *coordinates: np.ndarray) -> np.ndarray:
		"""
		Evaluates the expression. One array per axis must be passed (extra axes may be omitted when unused); the
		result has the broadcast shape of the coordinates, also for constant expressions.
		"""
		if self._compiled is None:
			self._compiled = sympy.lambdify(SYMBOLS, self._tree, modules="numpy")
		coordinates = [np.asarray(c, dtype=np.float64) for c in coordinates]
		shape = np.broadcast_shapes(*(c.shape for c in coordinates))
		padded = coordinates + [np.zeros(shape)] * (len(SYMBOLS) - len(coordinates))
		with np.errstate(all="ignore"):
			values = np.asarray(self._compiled(*padded), dtype=np.float64)
		return np.array(np.broadcast_to(values, shape))

	def at(self, points: np.ndarray) -> np.ndarray:
		""" :return: the values at ``points`` of shape ``(m, ndim)`` """
		points = np.asarray(points, dtype=np.float64)
		return self(*(points[:, a] for a in range(points.shape[1])))

	def sample(self, grid: Grid) -> ScalarField:
		"""
		:raise ExpressionError: if the expression uses unavailable coordinates or evaluates to non-finite values
		"""
		self.require_axes(grid.ndim)
		values = self(*grid.mesh())
		if not np.all(np.isfinite(values)):
			raise ExpressionError("Expression evaluates to non-finite values on the grid", self._text)
		return ScalarField(grid, values)

	def __eq__(self, other) -> bool:
		return isinstance(other, Expression) and sympy.simplify(self._tree - other._tree) == 0

	def __hash__(self) -> int:
		return hash(self._tree)

	def __str__(self) -> str:
		return self._text

	def __repr__(self) -> str:
		return repr_string(self, Expression.text)

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ FUNCTIONS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def expression_eval(expr: str, grid: Grid) -> ScalarField:
	"""
	Parses ``expr`` and samples it at the nodes of ``grid``.

	:raise ExpressionError: on parse or evaluation errors, with the offending position where one exists
	"""
	return Expression.parse(expr).sample(grid)
