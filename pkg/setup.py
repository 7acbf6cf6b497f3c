"""Build the optional compiled kernels.

The package runs without them; ``crowdinfluence._backend`` falls back to the
pure-Python kernels when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("CROWDINFLUENCE_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        extensions = [
            Extension(
                "crowdinfluence._kernels",
                ["src/crowdinfluence/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no -ffast-math: both backends must agree bit for bit
                extra_compile_args=["-O3"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
