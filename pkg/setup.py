"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); building it just makes the hot kernels fast.

    python setup.py build_ext --inplace

Set RANKFLOW_NO_OPENMP=1 to compile the extension without OpenMP, and
RANKFLOW_SKIP_EXT=1 to skip the extension entirely.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


def extensions():
    if os.environ.get("RANKFLOW_SKIP_EXT") == "1":
        return []
    try:
        from Cython.Build import cythonize
        import numpy
    except ImportError:
        print("rankflow: Cython/numpy unavailable, skipping compiled kernels",
              file=sys.stderr)
        return []

    from setuptools import Extension

    compile_args = ["-O3"]
    link_args = []
    if os.environ.get("RANKFLOW_NO_OPENMP") != "1" and sys.platform != "darwin":
        compile_args.append("-fopenmp")
        link_args.append("-fopenmp")

    ext = Extension(
        "rankflow._fastpath",
        ["src/rankflow/_fastpath.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=compile_args,
        extra_link_args=link_args,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


class optional_build_ext(build_ext):
    """Never fail the install because the extension did not compile."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any toolchain failure
            print(f"rankflow: compiled kernels skipped ({exc}); "
                  "the pure-Python fallback will be used", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"rankflow: building {ext.name} failed ({exc}); "
                  "the pure-Python fallback will be used", file=sys.stderr)


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
