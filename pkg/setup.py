import os

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "eemcs._ckernels",
        ["src/eemcs/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        # keep float results identical to the pure-Python kernels
        extra_compile_args=["-O2", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    ),
]

if os.environ.get("EEMCS_NO_EXTENSION"):
    extensions = []

setup(ext_modules=cythonize(extensions, language_level="3") if extensions else [])
