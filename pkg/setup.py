"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension; rmdl.kernels falls
back to a vectorized numpy implementation when the compiled module is
missing.  `pip install -e . --no-build-isolation` compiles it in place.
"""
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "rmdl.kernels._native",
                ["src/rmdl/kernels/_native.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level="3",
    )

setup(ext_modules=ext_modules)
