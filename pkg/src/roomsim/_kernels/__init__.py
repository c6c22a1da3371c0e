"""Kernel backend selection.

The compiled extension is preferred; the pure-Python reference takes over when
the extension is missing or ROOMSIM_PURE_PYTHON is set. Both produce
bit-identical results, which the test suite checks.
"""
import os

if os.environ.get("ROOMSIM_PURE_PYTHON"):
    from .reference import choose_velocity, integrate_arc

    BACKEND = "pure"
else:
    try:
        from ._core import choose_velocity, integrate_arc

        BACKEND = "compiled"
    except ImportError:
        from .reference import choose_velocity, integrate_arc

        BACKEND = "pure"

__all__ = ["choose_velocity", "integrate_arc", "BACKEND"]
