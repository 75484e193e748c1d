"""Step-kernel selection: compiled extension when available, else pure Python.

Set LATENTLOCO_PURE_PY=1 to force the fallback (e.g. for the kernel-agreement
tests and the benchmark).
"""

import os

if os.environ.get("LATENTLOCO_PURE_PY"):
    from . import _step_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _step_cy as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _step_py as _impl
        BACKEND = "python"

step_batch = _impl.step_batch


def get_backend(name=None):
    """Return a step_batch implementation by name ('cython'|'python'|None)."""
    if name is None:
        return step_batch
    if name == "python":
        from . import _step_py
        return _step_py.step_batch
    if name == "cython":
        from . import _step_cy
        return _step_cy.step_batch
    raise ValueError(f"unknown kernel backend {name!r}")
