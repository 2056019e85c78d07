# Sphinx configuration for the stabcred api documentation (built by docs/apidoc.sh)
import os
import sys
sys.path.insert(0, os.path.abspath('../..'))

import stabcred  # noqa: E402

project = 'stabcred'
copyright = '2024, stabcred developers'
author = 'stabcred developers'
release = stabcred.__version__

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'm2r2',
]

# engine modules document their params in reST field lists
autodoc_member_order = 'bysource'
autodoc_typehints = 'description'
napoleon_google_docstring = False

source_suffix = ['.rst', '.md']
master_doc = 'index'
exclude_patterns = ['_build']

html_theme = 'sphinx_rtd_theme'
html_title = f'stabcred {release}'
