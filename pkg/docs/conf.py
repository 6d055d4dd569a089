#!/usr/bin/env python
#
# packcount documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys

# If extensions (or modules to document with autodoc) are in another
# directory, add these directories to sys.path here.
sys.path.insert(0, os.path.abspath("../src"))

import packcount  # noqa: E402

# -- General configuration ---------------------------------------------

extensions = [
    "autoapi.extension",
    "sphinx.ext.autodoc",
    "sphinx.ext.autosectionlabel",
    "sphinx.ext.extlinks",
    "sphinx.ext.intersphinx",
    "sphinx.ext.napoleon",
    "sphinx.ext.viewcode",
    "sphinx.ext.todo",
    "sphinx_codeautolink",
    "sphinx_copybutton",
]

autoapi_dirs = ["../src/packcount"]
autoapi_root = "apidoc"
autoapi_ignore = ["*/testing/*"]

autosectionlabel_prefix_document = True
autosectionlabel_maxdepth = 2

autodoc_default_options = {
    "members": True,
    "undoc-members": True,
    "private-members": False,
    "special-members": False,
}

napoleon_numpy_docstring = True
napoleon_use_ivar = True

intersphinx_mapping = {
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
    "xarray": ("https://docs.xarray.dev/en/stable/", None),
}

extlinks = {
    "issue": ("https://github.com/packcount/packcount/issues/%s", "GH/%s"),
    "pull": ("https://github.com/packcount/packcount/pull/%s", "PR/%s"),
    "user": ("https://github.com/%s", "@%s"),
}

templates_path = ["_templates"]
source_suffix = [".rst"]
master_doc = "index"

# General information about the project.
project = "packcount"
copyright = "2024, packcount developers"
author = "packcount developers"

# The short X.Y version.
version = packcount.__version__.split("-")[0]
# The full version, including alpha/beta/rc tags.
release = packcount.__version__

language = "en"
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"
todo_include_todos = True

# -- Options for HTML output -------------------------------------------

html_theme = "furo"
htmlhelp_basename = "packcountdoc"

# -- Options for manual page output ------------------------------------

man_pages = [(master_doc, "packcount", "packcount Documentation", [author], 1)]
