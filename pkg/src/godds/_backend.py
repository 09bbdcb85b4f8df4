"""Numeric backend selection for the hot kernels.

``GODDS_BACKEND`` picks the implementation: ``numba`` (error if numba is not
installed), ``numpy`` (pure-numpy fallback), or ``auto`` (numba when
importable, else numpy). Tests and benchmarks may switch at runtime via
:func:`set_backend`.
"""

from __future__ import annotations

import os

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

_VALID = ("auto", "numba", "numpy")


def _resolve(name: str) -> str:
    name = (name or "auto").lower()
    if name not in _VALID:
        raise ValueError(f"GODDS_BACKEND must be one of {_VALID}, got {name!r}")
    if name == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("GODDS_BACKEND=numba requested but numba is not installed")
    return name


_active = _resolve(os.environ.get("GODDS_BACKEND", "auto"))


def get_backend() -> str:
    return _active


def set_backend(name: str) -> str:
    global _active
    _active = _resolve(name)
    return _active
