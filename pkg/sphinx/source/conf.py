# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

# If extensions (or modules to document with autodoc) are in another directory,
# add these directories to sys.path here. If the directory is relative to the
# documentation root, use os.path.abspath to make it absolute, like shown here.

import os
import sys

sys.path.insert(0, os.path.abspath("../.."))

# -- Project information -----------------------------------------------------

project = 'SubRosa'
copyright = '2026, SubRosa developers'
author = 'SubRosa developers'
release = '0.1.0'
version = release

# ~~~~~~~~~~~~~~~ CUSTOM CONF ~~~~~~~~~~~~~~~

add_module_names = False

# -- General configuration ---------------------------------------------------

extensions = ["sphinx.ext.autodoc", "sphinx.ext.todo", "sphinx_rtd_theme"]
templates_path = ['_templates']
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

# -- Options for HTML output -------------------------------------------------

html_theme = "sphinx_rtd_theme"
html_theme_options = {
		"display_version"    : True,
		"collapse_navigation": False
		}


# ~~~~~~~~~~~~~~~ sphinx.ext.to do CONFIG ~~~~~~~~~~~~~~~
todo_include_todos = True

# ~~~~~~~~~~~~~~~ AUTODOC CONFIG ~~~~~~~~~~~~~~~
# autodoc_preserve_defaults = True
autodoc_typehints = "description"
autodoc_inherit_docstrings = True
autodoc_class_signature = "separated"
autodoc_typehints_description_target = "documented"
autodoc_type_aliases = {
		"StencilOrder"  : ".StencilOrder",
		"ExpressionLike": ".ExpressionLike",
		"GradientMethod": ".GradientMethod",
		"Kernel"        : ".Kernel",
		"Stepper"       : ".Stepper",
		"Trajectory"    : ".Trajectory",
		"Bound"         : ".Bound",
		"Path"          : ".Path"
		}

autodoc_default_options = {
		"member-order": "bysource",
		}
