import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; qkevolve falls back to numpy kernels
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("QKEVOLVE_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "qkevolve._core",
                ["src/qkevolve/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )

setup(ext_modules=ext_modules)
