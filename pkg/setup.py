import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are optional: if the build fails (or Cython is
# missing) the package falls back to the pure-Python reference kernels.
extensions = [
    Extension(
        "gridal._kernels._core",
        ["src/gridal/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, language_level="3") if cythonize else [],
)
