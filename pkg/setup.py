"""Build hook for the optional compiled kernel extension.

The package is pure Python plus one optional Cython extension holding the
hot numeric kernels (masked softmax, layer norm, GELU forward/backward).
If Cython or a C compiler is unavailable the build degrades to the pure
NumPy fallback in ``diagseq._core_py``; nothing else changes.

Run ``python setup.py build_ext --inplace`` to compile in a source checkout.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "diagseq._core",
                ["src/diagseq/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
