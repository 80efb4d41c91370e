"""Build hook for the optional compiled simplex kernel.

The package works without the extension (a NumPy twin is selected at import
time), so a missing compiler or Cython must not break installation.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/mdileak/_simplex.pyx",
        compiler_directives={
            "language_level": "3",
            "cdivision": True,
            "boundscheck": False,
            "wraparound": False,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
except Exception as exc:  # pragma: no cover - toolchain dependent
    print(f"skipping compiled simplex kernel ({exc!r}); NumPy fallback will be used")

setup(ext_modules=ext_modules)
