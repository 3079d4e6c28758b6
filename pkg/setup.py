import warnings

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


extensions = [
    Extension(
        "sepquant.kernels._convcore",
        ["src/sepquant/kernels/_convcore.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]


class optional_build_ext(build_ext):
    """Build the compiled kernel if possible; the package falls back to the
    numpy implementation at import time when the extension is missing."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            warnings.warn(f"skipping compiled kernels ({exc}); numpy fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"failed to build {ext.name} ({exc}); numpy fallback will be used")


setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"})
    if cythonize is not None
    else [],
    cmdclass={"build_ext": optional_build_ext},
)
