"""Builds the optional Cython kernels.

    python setup.py build_ext --inplace

If Cython or a compiler is missing the package still installs and runs on
the pure-Python kernels.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("MLCIRC_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    name="mlcirc._ckernels",
                    sources=["src/mlcirc/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
