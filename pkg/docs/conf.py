#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# ttrnn documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath(".."))

# -- General configuration ------------------------------------------------

extensions = [
    "myst_parser",
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx.ext.intersphinx",
    "sphinx.ext.viewcode",
    "sphinx_rtd_theme",
]

source_suffix = ".rst"
master_doc = "index"

project = "ttrnn"
copyright = "2024, ttrnn developers"
author = "ttrnn developers"

# Kept in step with setup.py
version = "0.1"
release = "0.1.0"

language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"

# OpenCV is only imported for frame ingestion
autodoc_mock_imports = ["cv2"]


# -- Options for HTML output ----------------------------------------------

html_theme = "sphinx_rtd_theme"
htmlhelp_basename = "ttrnndoc"


# -- Options for manual page output ---------------------------------------

man_pages = [(master_doc, "ttrnn", "ttrnn Documentation", [author], 1)]


intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
}
