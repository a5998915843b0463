"""Build script: compiles the optional accelerator extension when possible.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any failure here downgrades to a pure-Python
install instead of aborting.  Set RIESZGAS_NO_EXT=1 to skip the extension
build explicitly.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class _OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"rieszgas: skipping accelerator build ({exc}); "
                  "using pure-Python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"rieszgas: failed to build {ext.name} ({exc}); "
                  "using pure-Python backend")


def _extensions():
    if os.environ.get("RIESZGAS_NO_EXT") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "rieszgas._accel",
        ["src/rieszgas/_accel.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=_extensions(), cmdclass={"build_ext": _OptionalBuildExt})
