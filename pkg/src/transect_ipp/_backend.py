"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
``TRANSECT_BACKEND`` forces a choice: ``compiled``, ``python`` or ``auto``
(default). Forcing ``compiled`` when the extension is missing is an error.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["compiled"] = _ckernels


def _select(name):
    name = (name or "auto").lower()
    if name == "auto":
        return "compiled" if "compiled" in BACKENDS else "python"
    if name not in BACKENDS:
        raise ImportError(f"kernel backend {name!r} is not available")
    return name


NAME = _select(os.environ.get("TRANSECT_BACKEND"))
kernels = BACKENDS[NAME]


def use(name):
    """Switch the active backend at runtime; returns the previous name."""
    global NAME, kernels
    previous = NAME
    NAME = _select(name)
    kernels = BACKENDS[NAME]
    return previous


def thread_count():
    """Worker count from ``TRANSECT_THREADS`` (0 or unset means all cores)."""
    raw = os.environ.get("TRANSECT_THREADS", "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError("TRANSECT_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)
