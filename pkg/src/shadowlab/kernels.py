"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-Python ``_pure`` module. Set ``SHADOWLAB_PURE=1`` to force the fallback.
"""

import os

from . import _pure

try:
    from . import _core
except ImportError:
    _core = None

_force_pure = os.environ.get("SHADOWLAB_PURE", "").lower() in ("1", "true", "yes")
backend = _core if (_core is not None and not _force_pure) else _pure
BACKEND = backend.NAME

carry_windows = backend.carry_windows
linear_recurrence = backend.linear_recurrence
chebyshev_pair = backend.chebyshev_pair


def available():
    """Names of the importable backends, compiled first."""
    names = []
    if _core is not None:
        names.append(_core.NAME)
    names.append(_pure.NAME)
    return names


def get(name):
    if name == _pure.NAME:
        return _pure
    if _core is not None and name == _core.NAME:
        return _core
    raise ValueError(f"backend {name!r} is not available (have {available()})")
