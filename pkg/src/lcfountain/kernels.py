"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``LCFOUNTAIN_PURE=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("LCFOUNTAIN_PURE") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"
floyd_batch = _impl.floyd_batch
structural_decode = _impl.structural_decode
