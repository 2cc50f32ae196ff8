"""Build script for the optional compiled stencil kernels.

If Cython or a C compiler is unavailable the package still installs and
falls back to the numpy implementation at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("hypslab._kernels_cy", ["src/hypslab/_kernels_cy.pyx"],
                   include_dirs=[numpy.get_include()],
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                   extra_compile_args=["-O2"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
