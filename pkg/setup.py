from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off: no fused multiply-add, so the compiled kernels produce
# bit-identical doubles to the pure-Python reference implementations.
extensions = [
    Extension(
        "roomsim._kernels._core",
        ["src/roomsim/_kernels/_core.pyx"],
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
        },
    )
)
