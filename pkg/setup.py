"""Build script: compiles the optional fast-path extension.

The package works without the extension (a pure-Python backend is selected
at import time), so a missing or failing Cython toolchain only costs speed.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("swarmchat._speedups", ["src/swarmchat/_speedups.pyx"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
