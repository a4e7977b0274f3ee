"""Numerical kernel backends.

Two implementations of the same hot-path contract: a compiled Cython
extension and a pure-Python reference. Both consume raw PCG64 doubles and
share every expression shape, branch, and clamp, so results are
bit-identical; the reference exists as a fallback and as the readable
specification of the compiled code.

Selection: the compiled backend when importable, else the reference. The
environment variable MNSBM_BACKEND (``c`` or ``python``) forces a choice;
asking for an unavailable compiled backend is an error rather than a
silent fallback.
"""

from __future__ import annotations

import os

from . import pykern

try:
    from . import _ckern as ckern
except ImportError:
    ckern = None

_BACKENDS = {"python": pykern}
if ckern is not None:
    _BACKENDS["c"] = ckern

_selected = None


def available_backends():
    return sorted(_BACKENDS)


def select_backend(name=None):
    """Resolve a backend by name, or by policy when name is None."""
    if name is None:
        name = os.environ.get("MNSBM_BACKEND") or None
    if name is None:
        return ckern if ckern is not None else pykern
    if name not in _BACKENDS:
        raise ValueError(
            f"unknown or unavailable backend {name!r}; available: {available_backends()}")
    return _BACKENDS[name]


def get_backend():
    """The process-wide default backend (resolved once, then cached)."""
    global _selected
    if _selected is None:
        _selected = select_backend()
    return _selected
