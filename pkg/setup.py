"""Build script for the compiled sequence kernels.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here should not block a pure-Python install:
build with ``pip install -e . --no-build-isolation``.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "eegvae.nn.kernels._core",
                ["src/eegvae/nn/kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-march=native", "-ffast-math"],
                extra_link_args=["-lmvec", "-lm"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
