"""Build script for the optional compiled kernels.

The package works without the extension (see ``spdmetric._backend``), so a
missing Cython or compiler only produces a warning.
"""
import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("SPDMETRIC_NO_EXT", "") in ("", "0"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "spdmetric._ckernels",
                    ["src/spdmetric/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError as exc:
        print(f"warning: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
