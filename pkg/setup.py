"""Build script for the optional compiled kernels.

The package is fully functional without the extension: relicov.kernels
falls back to the pure-Python implementations when the compiled module
is absent (e.g. no C compiler, or Cython missing at build time).
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/relicov/_kernels_c.pyx",
        compiler_directives={"language_level": "3"},
    )
    # -ffp-contract=off keeps C arithmetic bit-compatible with the
    # pure-Python fallback (no FMA contraction inside expressions).
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3", "-ffp-contract=off"]
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
