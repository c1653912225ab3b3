"""Build script.

The package is pure Python plus one optional Cython extension,
``freebound._tapecore``, which accelerates evaluation of compiled
expression tapes.  If Cython or a C compiler is unavailable the build
falls back to the pure-Python evaluator (same semantics, slower).

Set ``FREEBOUND_NO_EXT=1`` to skip the extension on purpose.
"""

import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; degrade to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: skipping compiled tape core ({exc}); "
                  "using the pure-Python evaluator")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: could not compile {ext.name} ({exc}); "
                  "using the pure-Python evaluator")


ext_modules = []
if os.environ.get("FREEBOUND_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("freebound._tapecore", ["src/freebound/_tapecore.pyx"])],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:  # pragma: no cover - toolchain dependent
        ext_modules = []

setup(
    ext_modules=ext_modules,
    cmdclass={"build_ext": optional_build_ext},
)
