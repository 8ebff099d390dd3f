from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernel is optional: without it the package falls back to the
# pure-numpy implementation in neural_gpu._core_py (same results, slower).
ext_modules = []
if cythonize is not None:
    ext = Extension(
        "neural_gpu._core",
        ["src/neural_gpu/_core.pyx", "src/neural_gpu/_convkernels.c"],
        include_dirs=["src/neural_gpu"],
        # -ffp-contract=off: no implicit FMA contraction, so the forward
        # convolution is bit-identical to the numpy fallback and the naive
        # reference (the backward opts into FMA explicitly).
        extra_compile_args=["-O3", "-march=native", "-ffp-contract=off"],
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
