"""Build hook for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); building it makes the factorization search and the LMI
solver roughly an order of magnitude faster.  Run
``python setup.py build_ext --inplace`` to compile in a source checkout.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "psdrank._core_cy",
                ["src/psdrank/_core_cy.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
