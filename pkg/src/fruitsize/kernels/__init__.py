"""Numeric kernel backends.

The compiled Cython extension (``_core``) is preferred when it imported
successfully; the numpy fallback (``_pure``) is always available. Set
``FRUITSIZE_KERNELS=pure`` or ``=compiled`` to force a backend (the latter
raises if the extension is missing).
"""

import os

from . import _pure

_requested = os.environ.get("FRUITSIZE_KERNELS", "").strip().lower()

if _requested == "pure":
    _impl = _pure
elif _requested == "compiled":
    from . import _core as _impl  # noqa: F401  (ImportError is the contract)
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pure

BACKEND = _impl.BACKEND
sphere_inlier_stats = _impl.sphere_inlier_stats
mvee_weights = _impl.mvee_weights
raycast_depth = _impl.raycast_depth


def available_backends():
    """Names of the importable backends (for tests and benchmarks)."""
    names = ["pure"]
    try:
        from . import _core  # noqa: F401
        names.append("compiled")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the backend module for an explicit name."""
    if name == "pure":
        return _pure
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown kernel backend: {name!r}")
