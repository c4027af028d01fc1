"""Build script for the optional compiled kernel.

The package is fully functional without the extension (a pure-Python
twin of every kernel is selected at import time); building it just makes
the large Monte Carlo runs ~100x faster.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("avforest._speedups", ["src/avforest/_speedups.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
