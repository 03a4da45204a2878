from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "routedpg.kernels._compiled",
                ["src/routedpg/kernels/_compiled.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Cython/numpy unavailable at build time: ship pure Python, the
    # kernels package falls back to its numpy implementation at import.
    extensions = []

setup(ext_modules=extensions)
