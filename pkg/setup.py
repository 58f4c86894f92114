"""Build script: compiles the optional native match kernel.

The package is fully functional without the extension; `agentmesh.rulekit`
falls back to the pure-Python kernel when the compiled module is absent
(or when AGENTMESH_PURE=1 is set).
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise install without it."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, cythonize failure, ...
            print(f"warning: native kernel not built ({exc}); "
                  "falling back to the pure-Python matcher")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: skipping {ext.name}: {exc}")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "agentmesh.rulekit._native",
        ["src/agentmesh/rulekit/_native.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": 3})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
