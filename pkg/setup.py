"""Build script for the optional compiled kernel extension.

The package is pure Python plus one Cython extension holding the pairwise
RBF reductions that dominate Gram assembly.  The extension is marked
optional: if no compiler or Cython is available the install still succeeds
and the package falls back to the numpy implementation at import time.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = [
    Extension(
        "daggp._kernels._pairwise",
        ["src/daggp/_kernels/_pairwise.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

if cythonize is not None:
    ext_modules = cythonize(extensions, language_level=3)
else:
    ext_modules = []

setup(ext_modules=ext_modules)
