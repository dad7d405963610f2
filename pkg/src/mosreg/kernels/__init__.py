"""Hot-kernel backend selection.

The compiled Cython extension is preferred; the numpy fallback is used
when it is missing or when MOSREG_PURE_PYTHON is set in the environment.
`BACKEND` reports which one is active.
"""

import os

if os.environ.get("MOSREG_PURE_PYTHON"):
    from . import _fallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _corex as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _fallback as _impl

        BACKEND = "python"

warp_bilinear = _impl.warp_bilinear
sample_points = _impl.sample_points
joint_hist = _impl.joint_hist
emma_gradient = _impl.emma_gradient

__all__ = ["BACKEND", "warp_bilinear", "sample_points", "joint_hist",
           "emma_gradient"]
