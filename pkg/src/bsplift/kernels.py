"""Selects the compiled kernels when the extension is built, numpy otherwise.

Set ``BSPLIFT_PURE_PYTHON=1`` to force the fallback.
"""
import os
import warnings

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("BSPLIFT_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        warnings.warn(
            "bsplift compiled kernels unavailable, using the numpy fallback",
            RuntimeWarning,
            stacklevel=2,
        )
        _impl = _fallback

lift_rows = _impl.lift_rows
bspline_local = _impl.bspline_local
jacobi_sweeps = _impl.jacobi_sweeps
