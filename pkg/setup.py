"""Build script: compiles the optional fast kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so a failed compile only costs speed.
"""
import os

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    HAVE_CYTHON = True
except Exception:  # pragma: no cover - build-environment dependent
    cythonize = None
    HAVE_CYTHON = False

ext_modules = []
if HAVE_CYTHON and not os.environ.get("FPDG_SKIP_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "fpdg._kernels._core",
                ["src/fpdg/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
