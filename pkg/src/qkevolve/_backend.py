"""Select the compiled core when it is importable, else the numpy fallback.

Set ``QKEVOLVE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

if os.environ.get("QKEVOLVE_PURE_PYTHON"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _fallback

NAME = "compiled" if _impl is not _fallback else "numpy"


def apply_circuit(states, kinds, targets, controls, features, scales, X):
    return _impl.apply_circuit(states, kinds, targets, controls, features, scales, X)


def smo_solve(K, y, C, tol, max_iter):
    return _impl.smo_solve(K, y, float(C), float(tol), int(max_iter))


def use(name: str) -> None:
    """Switch implementation at runtime (``"compiled"`` or ``"numpy"``); for tests and benchmarks."""
    global _impl, NAME
    if name == "numpy":
        _impl = _fallback
    elif name == "compiled":
        from . import _core

        _impl = _core
    else:
        raise ValueError(f"unknown backend {name!r}")
    NAME = name
