import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off: the compiled kernel must round every float op exactly
# like the interpreted one, so fused multiply-adds are disabled.
extensions = [
    Extension(
        "mnsbm.kernels._ckern",
        ["src/mnsbm/kernels/_ckern.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
