"""Import-time selection between the compiled kernels and the numpy fallback.

Set ``GSPFILTER_PURE=1`` to force the fallback.
"""
from __future__ import annotations

import os
import warnings

BACKEND = "python"

if os.environ.get("GSPFILTER_PURE", "") not in ("", "0"):
    from ._kernels_py import gather_v, gather_w, gauss_solve, w_accumulate
else:
    try:
        from ._kernels import gather_v, gather_w, gauss_solve, w_accumulate

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        warnings.warn("compiled kernels unavailable; using the numpy fallback", RuntimeWarning, stacklevel=2)
        from ._kernels_py import gather_v, gather_w, gauss_solve, w_accumulate

__all__ = ["BACKEND", "gather_v", "gather_w", "gauss_solve", "w_accumulate"]
