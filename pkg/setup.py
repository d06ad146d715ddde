import numpy as np
from setuptools import Extension, setup

# The compiled kernels are an optional speedup; the package falls back to the
# pure-numpy implementation in locality_lab._kernels_py when they are missing.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "locality_lab._kernels",
                ["src/locality_lab/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
