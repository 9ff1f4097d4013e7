"""Hot-kernel dispatch: compiled extension when built, numpy otherwise.

Set FPDG_PURE_PYTHON=1 to force the fallback.  ``get_impl`` lets the
benchmark harness time both implementations side by side.
"""
import os

from . import reference

try:
    from . import _core
except ImportError:  # extension not built; pure-python fallback
    _core = None

if _core is not None and not os.environ.get("FPDG_PURE_PYTHON"):
    _active = _core
else:
    _active = reference

HAVE_COMPILED = _core is not None
IMPL_NAME = _active.IMPL_NAME
dr_iterate = _active.dr_iterate


def available_implementations():
    names = ["python"]
    if HAVE_COMPILED:
        names.append("compiled")
    return names


def get_impl(name: str = "auto"):
    """Resolve an implementation module by name: auto|python|compiled."""
    if name in ("auto", IMPL_NAME):
        return _active
    if name == "python":
        return reference
    if name == "compiled":
        if _core is None:
            raise ValueError("compiled kernel requested but the extension is not built")
        return _core
    raise ValueError(f"unknown kernel implementation {name!r}")
