from setuptools import Extension, setup

import numpy as np
from Cython.Build import cythonize

extensions = cythonize(
    [
        Extension(
            "qpert._speedups",
            sources=["src/qpert/_speedups.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
        )
    ],
    compiler_directives={"language_level": "3"},
)

setup(ext_modules=extensions)
