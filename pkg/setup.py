import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# The extension is optional: hsigraph.kernels falls back to numpy code when
# the compiled module is missing.
extensions = [
    Extension(
        "hsigraph._ckernels",
        ["src/hsigraph/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
