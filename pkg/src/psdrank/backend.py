"""Numeric kernel backend selection.

Prefers the compiled extension and falls back to the numpy implementation
when it is missing (or when ``PSDRANK_PURE_PY`` is set in the environment).
"""

import os

from . import _core_py

if os.environ.get("PSDRANK_PURE_PY"):
    _impl = _core_py
else:
    try:
        from . import _core_cy as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _core_py

BACKEND = _impl.BACKEND
HAVE_COMPILED = BACKEND == "cython"

jacobi_eigh = _impl.jacobi_eigh
batch_eigh = _impl.batch_eigh
batch_project_psd = _impl.batch_project_psd
psd_als = _impl.psd_als
