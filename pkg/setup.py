"""Build script: compiles the optional tridiagonal-solver extension when Cython
and a C toolchain are available, and falls back to a pure-Python install
otherwise. The package selects the backend at import time."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/ridgecov/_kernels/_tridiag.pyx"],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
    include_dirs = [numpy.get_include()]
except Exception:  # pragma: no cover - toolchain-dependent
    include_dirs = []

setup(
    ext_modules=ext_modules,
    include_dirs=include_dirs,
)
