import os

from setuptools import Extension, setup

# The compiled step kernel is an optional speedup; the package falls back to
# the pure-Python kernel when the extension is absent (see envs/kernels.py).
ext_modules = []
if not os.environ.get("LATENTLOCO_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "latentloco.envs._step_cy",
                    sources=["src/latentloco/envs/_step_cy.pyx"],
                    # -ffp-contract=off keeps the compiled kernel bit-identical
                    # to the pure-Python fallback (no FMA contraction).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
