"""Build script: compiles the optional edit-distance extension.

The package is fully functional without the extension; metrics falls back
to the pure-Python kernel at import time.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("intentkit._editdist", ["src/intentkit/_editdist.pyx"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
