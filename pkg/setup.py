from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the package falls back to the numpy kernels
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "narrative_media._ckernels",
                ["src/narrative_media/_ckernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
