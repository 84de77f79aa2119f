"""Numerical toolkit for Besov and Triebel–Lizorkin spaces adapted to
discretized self-adjoint operators.

Submodules load on first attribute access, so ``besovlab.cli`` can configure
BLAS threading before numpy is imported.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = ("grid", "operators", "calculus", "partition", "spaces", "bounds", "interp",
               "config", "suites", "errors", "cli")

__all__ = list(_SUBMODULES)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
