import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "beamfilt._imgsrc",
                ["src/beamfilt/_imgsrc.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython available: the package falls back to the numpy kernel at import.
    ext_modules = []

setup(ext_modules=ext_modules)
