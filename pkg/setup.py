import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; the numpy kernel is used
    cythonize = None

extensions = []
if cythonize is not None and not os.environ.get("WWRCVA_NO_EXT"):
    extensions = cythonize(
        [
            Extension(
                "wwrcva.mc._kernel",
                ["src/wwrcva/mc/_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-fno-math-errno", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
