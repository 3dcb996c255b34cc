"""Build script: compiles the optional Cython lane kernel.

The package works without the extension (a pure-Python twin is selected at
import time), so any compilation failure is downgraded to a warning.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "gridsignal._lane_kernel",
                ["src/gridsignal/_lane_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: forbid fused multiply-add so results are
                # bit-identical to the pure-Python kernel. No -ffast-math.
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - depends on toolchain
    sys.stderr.write(
        f"warning: Cython lane kernel not built ({exc!r}); "
        "falling back to the pure-Python kernel\n"
    )
    ext_modules = []

setup(ext_modules=ext_modules)
