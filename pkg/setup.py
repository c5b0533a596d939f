import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PERIODIV_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "periodiv._mc_cy",
                    ["src/periodiv/_mc_cy.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython: the pure-Python simulation backend is used instead.
        ext_modules = []

setup(ext_modules=ext_modules)
