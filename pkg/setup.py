"""Build script with an optional Cython extension for the hot stepping kernels.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any failure to build or cythonize degrades
gracefully to a pure-Python install.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("DL_SKIP_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "dyson_laguerre._kernels._core",
            sources=["src/dyson_laguerre/_kernels/_core.pyx"],
            include_dirs=[numpy.get_include()],
            # -ffp-contract=off keeps the compiled kernel bit-identical to the
            # numpy reference (no FMA contraction of a*b+c).
            extra_compile_args=["-O2", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except Exception as exc:  # pragma: no cover - build environment dependent
        print(f"warning: skipping compiled kernels ({exc}); using numpy fallback")
        ext_modules = []

setup(ext_modules=ext_modules)
