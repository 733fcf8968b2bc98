from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "reset_sde._kernels._walk",
                sources=["src/reset_sde/_kernels/_walk.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: install pure-Python only, the kernel package falls back
    # to the numpy implementation at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
