"""Build script for the optional compiled trajectory kernel.

The package works without the extension: ``postsde.kernels`` falls back to
the pure-Python stepping loop when ``_core`` cannot be imported.
"""
import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build without Cython
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("POSTSDE_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "postsde.kernels._core",
                ["src/postsde/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
