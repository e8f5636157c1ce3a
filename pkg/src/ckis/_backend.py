"""Select the compiled kernels when importable, else the numpy fallback.

Set ``CKIS_BACKEND=python`` to force the fallback (used by the benchmark
and by tests that compare the two).
"""

import importlib
import os

from . import _pykernels


def load(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None=auto)."""
    if name is None:
        name = os.environ.get("CKIS_BACKEND", "auto").lower()
    if name == "python":
        return _pykernels
    try:
        return importlib.import_module("ckis._ckernels")
    except ImportError:
        if name == "cython":
            raise
        return _pykernels


kernels = load()
BACKEND = "python" if kernels is _pykernels else "cython"
