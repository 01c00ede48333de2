import os

from setuptools import setup

ext_modules = []
if os.environ.get("LSVP_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext = Extension(
            "lsvp._kernels",
            ["src/lsvp/_kernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize(ext, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
