"""Build script: compiles the accelerated Mittag-Leffler core when a C
toolchain and Cython are available, otherwise installs pure-Python only.

The package selects the backend at import time (fracspec._core), so a
failed extension build degrades to the numpy fallback instead of breaking
the install.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/fracspec/_core/_mlcompiled.pyx",
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    print(f"fracspec: skipping compiled core ({exc}); pure-Python fallback will be used")

setup(ext_modules=ext_modules)
