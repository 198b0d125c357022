"""
:Date: 18.10.2026

.. versionadded:: v0.1.0
"""

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ IMPORTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

import os.path
import tempfile
import unittest

from SubRosa.TeXReport import *

# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~ UNIT TESTS ~~~~~~~~~~~~~~~
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

class TestFormatting(unittest.TestCase):

	def test_escape(self):
		self.assertEqual(r"l2\_error", escape("l2_error"))
		self.assertEqual(r"50\% \& \$1 \#2", escape("50% & $1 #2"))
		self.assertEqual(r"\textbackslash{}x\{y\}", escape("\\x{y}"))
		self.assertEqual(r"a\textasciitilde{}b\textasciicircum{}c", escape("a~b^c"))
		self.assertEqual("sin-heisenberg", escape("sin-heisenberg"))

	def test_latex_number(self):
		self.assertEqual("--", latex_number(None))
		self.assertEqual("yes", latex_number(True))
		self.assertEqual("12", latex_number(12))
		self.assertEqual("$0$", latex_number(0.0))
		self.assertEqual("NaN", latex_number(float("nan")))
		self.assertEqual(r"$\infty$", latex_number(float("inf")))
		self.assertEqual(r"$-\infty$", latex_number(float("-inf")))
		self.assertEqual("$2.500$", latex_number(2.5))
		self.assertEqual(r"$1.230 \times 10^{-4}$", latex_number(1.23e-4))
		self.assertEqual(r"$-5.0 \times 10^{3}$", latex_number(-5000.0, 1))

class TestLineHandler(unittest.TestCase):

	def setUp(self) -> None:
		self.handler = LineHandler()

	def tearDown(self) -> None:
		del self.handler

	def test_write(self):
		self.handler.write("a\nb")
		self.handler.newline()
		self.handler.write(b"c")
		self.assertEqual(4, len(self.handler))
		self.assertEqual(((0, "a"), (0, "b"), (0, ""), (0, "c")), self.handler.data)
		self.assertEqual("a\nb\n\nc", str(self.handler))

	def test_nested(self):
		outer = LineHandler(1)
		inner = LineHandler(1)
		inner.write("x")
		outer.write(inner)
		self.assertEqual(((2, "x"),), outer.data)
		self.assertEqual("\t\tx", str(outer))

	def test_indented(self):
		with self.handler.indented("begin", "end") as inner:
			inner.write("body")
			with inner.indented() as deeper:
				deeper.write("deep")
		self.assertEqual("begin\n\tbody\n\t\tdeep\nend", str(self.handler))

class TestReportDocument(unittest.TestCase):

	def setUp(self) -> None:
		self.directory = tempfile.TemporaryDirectory()
		self.doc = ReportDocument(os.path.join(self.directory.name, "out", "report"), "moser_flat")

	def tearDown(self) -> None:
		self.directory.cleanup()
		del self.directory, self.doc

	def test_init(self):
		self.assertTrue(self.doc.path.endswith("report.tex"))
		self.assertTrue(os.path.isabs(self.doc.path))
		self.assertEqual("moser_flat", self.doc.title)
		self.assertFalse(self.doc.open)
		self.assertFalse(self.doc.written)

	def test_write(self):
		with self.doc as doc:
			self.assertTrue(doc.open)
			doc.section("Results")
			doc.paragraph("Error below 1% of the initial gap.")
			doc.table(("frame", "steps"), [("flat", 8), ("sin-heisenberg", None)], caption="Runs")
		self.assertFalse(self.doc.open)
		self.assertTrue(self.doc.written)
		self.assertTrue(os.path.isfile(self.doc.path))

		with open(self.doc.path, "r", encoding="utf-8") as file:
			text = file.read()
		self.assertEqual(self.doc.to_latex(), text)
		self.assertTrue(text.startswith("\\documentclass[a4paper, 11pt]{article}\n"))
		for expected in (r"\usepackage{booktabs}", r"\title{moser\_flat}", r"\section*{Results}",
						 r"Error below 1\% of the initial gap.", r"\begin{tabular}{lr}", r"flat & 8 \\",
						 r"sin-heisenberg & -- \\", r"\caption*{Runs}", r"\end{document}"):
			self.assertIn(expected, text)

	def test_metrics_table(self):
		with self.doc as doc:
			doc.metrics_table({"l2_error": 1.5e-4, "iterations": 12},
							  {"l2_error": ("max", 1e-3, True), "iterations": ("min", 20, False)})
			doc.metrics_table({"action": 0.25})
		text = self.doc.to_latex()
		self.assertIn(r"metric & value & bound & verdict \\", text)
		self.assertIn(r"l2\_error & $1.500 \times 10^{-4}$ & $\le$ $1.000 \times 10^{-3}$ & pass \\", text)
		self.assertIn(r"iterations & 12 & $\ge$ 20 & \textbf{fail} \\", text)
		self.assertIn(r"action & $2.500 \times 10^{-1}$ & -- & -- \\", text)

	def test_errors(self):
		with self.assertRaises(ReportError):
			self.doc.paragraph("closed")
		with self.assertRaises(ReportError):
			with self.doc as doc:
				doc.table(("a", "b"), [(1,)])
		self.assertFalse(self.doc.written)
		self.assertFalse(os.path.exists(self.doc.path))

		with self.doc:
			pass
		with self.assertRaises(ReportError):
			self.doc.__enter__()
