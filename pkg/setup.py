"""Build the optional Cython sampling kernel; the package works without it."""

import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("NUMNULLS_NO_EXTENSION"):
    ext_modules = cythonize(
        [
            Extension(
                "numnulls._kernels",
                sources=["src/numnulls/_kernels.pyx"],
                # bit-identity with the Python twin rules out contraction and fast-math
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
