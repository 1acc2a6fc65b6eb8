"""Build script for the compiled integrator core.

The extension is optional: if Cython or a C compiler is unavailable (or
HOMOPOLICY_PURE=1 is set), the package installs without it and falls back
to the pure-Python kernels at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("HOMOPOLICY_PURE", "0") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "homopolicy._kernels._native",
                    sources=["src/homopolicy/_kernels/_native.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "language_level": "3",
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
