"""Build script: compiles the optional scanner extension when Cython is present.

The package is fully functional without the extension; rbskit.scanner falls
back to the pure-Python implementation at import time.
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
                "rbskit._scanner",
                ["src/rbskit/_scanner.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
