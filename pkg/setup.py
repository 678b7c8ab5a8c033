"""Build script for the optional compiled kernel.

The pure-Python kernel is used automatically when the extension is absent,
so a failed or skipped compile still yields a working install.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "corrdecay._ckernel",
                ["src/corrdecay/_ckernel.pyx"],
                # keep a*b+c unfused so results match the Python kernel bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
