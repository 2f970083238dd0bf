"""Backend selection for the hot loops.

The compiled extension ``hsigraph._ckernels`` is used when it imports;
otherwise the numpy implementations in ``hsigraph._pykernels`` are used.
Set ``HSIGRAPH_PURE_PYTHON=1`` to force the fallback.  Both modules stay
reachable as ``python_backend`` and ``compiled_backend`` (None if not built).
"""
import os

from . import _pykernels as python_backend

try:
    from . import _ckernels as compiled_backend
except ImportError:
    compiled_backend = None

_forced = os.environ.get("HSIGRAPH_PURE_PYTHON", "").lower() in ("1", "true", "yes")
_active = python_backend if _forced or compiled_backend is None else compiled_backend
BACKEND = "python" if _active is python_backend else "cython"

slic_iterate = _active.slic_iterate
label_components = _active.label_components
knn_rows = _active.knn_rows
project_rows = _active.project_rows
