import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # build without the compiled loop; the NumPy fallback is used
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "attractor_lab._imex",
                ["src/attractor_lab/_imex.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
