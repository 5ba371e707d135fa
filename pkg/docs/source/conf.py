import os
import sys
sys.path.insert(0, os.path.relpath('../'))
from egosocial import __version__

# -- Project information -----------------------------------------------------

project = 'egosocial'
copyright = '2024, egosocial developers'
author = 'egosocial developers'

version = __version__
release = __version__

rst_epilog = """
.. |egosocialProjectVersion| replace:: {versionnum}
""".format(
versionnum = version,
)

# -- General configuration ---------------------------------------------------

extensions = [ 'sphinx.ext.autodoc',
               'sphinx.ext.autosectionlabel',
               'sphinx.ext.autosummary',
               'sphinx.ext.todo',
               'sphinx_rtd_theme'
]

templates_path = ['_templates']

exclude_patterns = []

autosectionlabel_prefix_document = True

autodoc_member_order = 'bysource'

# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
