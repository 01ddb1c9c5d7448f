"""Build hook for the optional compiled kernels.

Project metadata lives in pyproject.toml. If Cython or a C compiler is
missing the package still installs and runs on the numpy fallback.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "riskquad._kernels",
                ["src/riskquad/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # no fused multiply-add, so results match the numpy fallback bit for bit
                extra_compile_args=["-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
